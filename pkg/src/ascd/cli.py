"""Command-line entry point: ``python -m ascd <command>``.

Commands: gen-data, train, decode, eval-cer, dump-attention, count.  Each
command that takes configuration accepts ``--config file.json``; every field
in that file can be overridden by a long flag of the same name.  Exit codes:
0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .complexity import count_attention_elements
from .data import SyntheticSpec, generate_corpus, load_spec, read_manifest, read_split
from .inference import beam_decode, capture_attention, dump_attention, greedy_decode
from .metrics import corpus_cer
from .model import VARIANTS, ASRModel, ModelConfig, count_parameters, table1_config
from .training import TrainConfig, Trainer, load_training_state

log = logging.getLogger("ascd")


class UsageError(Exception):
    pass


# -- config plumbing ---------------------------------------------------------


def _flag_type(f: dataclasses.Field):
    default = f.default
    if isinstance(default, bool):
        return lambda s: s.lower() in ("1", "true", "yes")
    if isinstance(default, (int, float, str)):
        return type(default)
    # Optional[int] fields such as SyntheticSpec.feat_dim
    return int


def add_dataclass_flags(parser, cls, skip=()):
    group = parser.add_argument_group(cls.__name__)
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        kwargs = {"type": _flag_type(f), "default": None, "metavar": f.name.upper()}
        if f.name == "variant":
            kwargs["choices"] = VARIANTS
            kwargs.pop("metavar")
        group.add_argument(f"--{f.name}", **kwargs)


def resolve(cls, args, file_cfg: dict, base: dict | None = None):
    """Dataclass defaults < ``base`` < config file < command-line flags."""
    names = {f.name for f in dataclasses.fields(cls)}
    values = dict(base or {})
    values.update({k: v for k, v in file_cfg.items() if k in names})
    for name in names:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return cls(**values)


def read_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def check_known(file_cfg: dict, *classes, extra=()):
    known = set(extra)
    for cls in classes:
        known |= {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(file_cfg) - known)
    if unknown:
        raise UsageError(f"unknown config fields: {unknown}")


def setup_logging(out_dir=None, verbose=False):
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(fmt)
    root.addHandler(console)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(Path(out_dir) / "run.log")
        fh.setFormatter(fmt)
        root.addHandler(fh)


def echo_config(name, resolved: dict):
    log.info("resolved %s config: %s", name, json.dumps(resolved, sort_keys=True))


def load_model(checkpoint) -> ASRModel:
    from .checkpoint import load_checkpoint

    _, meta = load_checkpoint(checkpoint)
    if not meta or "model_config" not in meta:
        raise ValueError(f"{checkpoint}: no model_config in checkpoint metadata")
    model = ASRModel(ModelConfig.from_dict(meta["model_config"]))
    load_training_state(checkpoint, model)
    return model


# -- commands ------------------------------------------------------------------


def cmd_gen_data(args):
    file_cfg = read_config(args.config)
    check_known(file_cfg, SyntheticSpec)
    spec = resolve(SyntheticSpec, args, file_cfg)
    echo_config("data", dataclasses.asdict(spec))
    out = generate_corpus(spec, args.out)
    counts = {s: len(read_manifest(out / s)) for s in spec.counts()}
    log.info("wrote %s to %s", counts, out)
    print(json.dumps({"out": str(out), **counts}))
    return 0


def cmd_train(args):
    file_cfg = read_config(args.config)
    check_known(file_cfg, ModelConfig, TrainConfig)
    data = Path(args.data)
    base = {}
    if (data / "spec.json").exists():
        spec = load_spec(data)
        base = {"vocab_size": spec.model_vocab_size, "feat_dim": spec.feat_dim}
    model_cfg = resolve(ModelConfig, args, file_cfg, base)
    train_cfg = resolve(TrainConfig, args, file_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {"model": model_cfg.to_dict(), "train": train_cfg.to_dict(), "data": str(data), "out": str(out)}
    echo_config("train", resolved)
    (out / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")

    train_set = read_split(data / "train")
    dev_set = read_split(data / "dev") if (data / "dev").exists() else []
    model = ASRModel(model_cfg, seed=train_cfg.seed)
    trainer = Trainer(model, train_set, dev_set, train_cfg, out)
    if args.resume:
        trainer.resume(args.resume)
    history = trainer.run()
    if history:
        print(json.dumps(history[-1]))
    return 0


def _decode_one(model, utt, args):
    if args.greedy:
        return greedy_decode(model, utt.features, max_len=args.max_len)
    return beam_decode(
        model, utt.features, beam=args.beam, max_len=args.max_len, length_penalty=args.length_penalty
    )


def cmd_decode(args):
    if args.beam < 1:
        raise UsageError("--beam must be >= 1")
    model = load_model(args.checkpoint)
    echo_config(
        "decode",
        {"checkpoint": str(args.checkpoint), "data": str(args.data), "greedy": args.greedy,
         "beam": args.beam, "max_len": args.max_len, "length_penalty": args.length_penalty},
    )
    utts = sorted(read_split(args.data), key=lambda u: u.id)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for u in utts:
        r = _decode_one(model, u, args)
        lines.append(json.dumps({"id": u.id, "token_ids": r.transcript, "score": r.score, "truncated": r.truncated}))
    (out / "hyp.jsonl").write_text("".join(line + "\n" for line in lines))
    log.info("decoded %d utterances into %s", len(lines), out / "hyp.jsonl")
    return 0


def _transcripts(path) -> dict[str, list[int]]:
    return {e["id"]: e["token_ids"] for e in read_manifest(path)}


def cmd_eval_cer(args):
    ref, hyp = _transcripts(args.ref), _transcripts(args.hyp)
    missing = sorted(set(ref) - set(hyp))
    if missing:
        raise ValueError(f"{len(missing)} reference utterances have no hypothesis, e.g. {missing[0]}")
    report = corpus_cer((ref[k], hyp[k]) for k in sorted(ref))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "cer.json").write_text(json.dumps(report.to_dict()) + "\n")
    print(f"cer={report.cer}")
    print(json.dumps(report.to_dict()))
    return 0


def cmd_dump_attention(args):
    model = load_model(args.checkpoint)
    utts = read_split(args.data)
    if args.utt is None:
        utt = utts[0]
    else:
        matches = [u for u in utts if u.id == args.utt]
        if not matches:
            raise ValueError(f"utterance {args.utt!r} not found in {args.data}")
        utt = matches[0]
    tokens = utt.token_ids if args.reference else greedy_decode(model, utt.features).transcript
    records = capture_attention(model, utt.features, tokens, include_encoder=args.include_encoder)
    if args.top_only:
        top = model.cfg.n_decoder_layers - 1
        records = [r for r in records if r.layer == top and r.kind != "encoder"]
    written = dump_attention(records, args.out)
    log.info("utterance %s, tokens %s: wrote %d files to %s", utt.id, tokens, len(written), args.out)
    print(json.dumps({"utterance": utt.id, "tokens": tokens, "files": len(written)}))
    return 0


def _count_geometry(args, variant):
    file_cfg = read_config(args.config)
    check_known(file_cfg, ModelConfig)
    base = table1_config(variant).to_dict() if not args.config else {}
    base["variant"] = variant
    cfg = resolve(ModelConfig, args, {**file_cfg, "variant": variant}, base)
    return dataclasses.replace(cfg, variant=variant)


def cmd_count(args):
    variants = [args.variant] if args.variant else list(VARIANTS)
    if args.what == "params":
        totals = {}
        for v in variants:
            cfg = _count_geometry(args, v)
            pc = count_parameters(cfg)
            totals[v] = pc.total
            print(f"{v}: {pc.total:,} params {json.dumps(pc.breakdown)}")
        if {"vanilla", "ascd"} <= set(totals):
            print(f"vanilla - ascd: {totals['vanilla'] - totals['ascd']:,}")
        return 0
    cfg = _count_geometry(args, variants[0])
    report = count_attention_elements(cfg, args.T, args.N, variants=variants)
    for v in variants:
        print(f"{v}: {report.score_elements[v]} score elements per head per layer, "
              f"{report.total_macs(v):,} decoder MACs")
    print(json.dumps(report.to_dict()))
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ascd", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic train/dev/test corpus")
    g.add_argument("--out", required=True, help="dataset directory")
    g.add_argument("--config", help="JSON file with SyntheticSpec fields")
    add_dataclass_flags(g, SyntheticSpec)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model on a generated corpus")
    t.add_argument("--data", required=True, help="dataset directory from gen-data")
    t.add_argument("--out", required=True, help="run directory for checkpoints and logs")
    t.add_argument("--config", help="JSON file with model and training fields")
    t.add_argument("--resume", help="checkpoint to continue from")
    add_dataclass_flags(t, ModelConfig)
    add_dataclass_flags(t, TrainConfig)
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("decode", help="decode a split, writing hyp.jsonl")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--data", required=True, help="split directory with manifest.jsonl")
    d.add_argument("--out", required=True)
    mode = d.add_mutually_exclusive_group()
    mode.add_argument("--greedy", action="store_true")
    mode.add_argument("--beam", type=int, default=4)
    d.add_argument("--max_len", type=int, default=None)
    d.add_argument("--length_penalty", type=float, default=1.0)
    d.set_defaults(func=cmd_decode)

    e = sub.add_parser("eval-cer", help="score hypotheses against references")
    e.add_argument("--ref", required=True, help="manifest.jsonl, a split directory, or hyp.jsonl")
    e.add_argument("--hyp", required=True)
    e.add_argument("--out", help="directory for cer.json")
    e.set_defaults(func=cmd_eval_cer)

    a = sub.add_parser("dump-attention", help="write attention maps of one utterance as CSV and PGM")
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--data", required=True, help="split directory")
    a.add_argument("--out", required=True)
    a.add_argument("--utt", help="utterance id (default: first in manifest)")
    a.add_argument("--reference", action="store_true", help="teacher-force the reference instead of the greedy output")
    a.add_argument("--top_only", action="store_true", help="only the top decoder layer")
    a.add_argument("--include_encoder", action="store_true")
    a.set_defaults(func=cmd_dump_attention)

    c = sub.add_parser("count", help="parameter or attention-cost accounting")
    c.add_argument("what", choices=["params", "flops"])
    c.add_argument("--config", help="JSON model geometry (default: 256-d, 12+6 layers, 4233 tokens)")
    c.add_argument("--T", type=int, default=10, help="acoustic length for flops")
    c.add_argument("--N", type=int, default=5, help="token length for flops")
    add_dataclass_flags(c, ModelConfig)
    c.set_defaults(func=cmd_count)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(getattr(args, "out", None) if args.command == "train" else None, args.verbose)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ascd {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        log.error("%s failed: %s", args.command, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
