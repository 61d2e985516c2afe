"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the end-to-end
training criterion takes a few minutes per variant.
"""

import itertools
import time

import numpy as np
import pytest

from conftest import random_config, random_utterance
import test_inference
from test_inference import sharpened, teacher_forced_logits
from test_masking import all_instances, expected_blocked
from test_tensor import _op_cases
from ascd import masking as M
from ascd.cli import main as cli_main
from ascd.complexity import count_attention_elements, instrumented_counts
from ascd.data import SyntheticSpec, synthesize_split
from ascd.gradcheck import check_gradients
from ascd.inference import beam_decode, greedy_decode, normalized_score
from ascd.model import SOS_EOS_ID, VARIANTS, ASRModel, ModelConfig, count_parameters
from ascd.tensor import Parameter, no_grad
from ascd.training import TrainConfig, Trainer, evaluate_cer, pad_and_batch

# pinned tolerances
PREFIX_TOL = 1e-9
GRAD_TOL = 1e-4
GRAD_STEP = 1e-6
PADDING_TOL = 1e-9
E2E_MAX_CER = 0.05
E2E_VANILLA_MARGIN = 0.01
E2E_MAX_STEPS = 3000
E2E_MAX_SECONDS = 15 * 60
LOSS_RATIO_AT_2000 = 0.25
TABLE1_DELTA = 1_447_424

# end-to-end toy recipe shared by all three variants; a deep decoder plus
# on-the-fly relabelling/trim is what gets alignment to generalize from 2,000 utterances
E2E_MODEL = dict(d_model=64, d_embed=64, d_ff=256, n_heads=4, n_encoder_layers=2, n_decoder_layers=8)
E2E_TRAIN = dict(batch_size=32, max_steps=E2E_MAX_STEPS, base_lr=3e-3, warmup_steps=500, eval_every=250, augment=True)


def report(capsys, number, title, check):
    """Run ``check``; print one PASS/FAIL line (past output capture) and re-raise on failure."""
    try:
        detail = check()
    except BaseException as exc:
        with capsys.disabled():
            print(f"\nFAIL criterion {number}: {title}: {type(exc).__name__}: {str(exc)[:200]}")
        raise
    with capsys.disabled():
        print(f"\nPASS criterion {number}: {title}" + (f" ({detail})" if detail else ""))


def random_dec_in(rng, cfg, N, valid):
    dec = rng.integers(2, cfg.vocab_size, size=(len(valid), N))
    dec[:, 0] = SOS_EOS_ID
    for b, n in enumerate(valid):
        dec[b, n:] = 0
    return dec


def test_c1_leak_freedom(capsys):
    def check():
        t0 = time.perf_counter()
        rng = np.random.default_rng(101)
        checked = 0
        for i in range(200):
            v = VARIANTS[i % 3]
            cfg = random_config(rng, v)
            model = ASRModel(cfg, seed=i)
            B = int(rng.integers(1, 3))
            T0 = int(rng.integers(2, 21))  # up to 10 stacked frames
            N = int(rng.integers(1, 7))
            frames = rng.integers(2, T0 + 1, size=B)
            frames[0] = T0
            valid = rng.integers(1, N + 1, size=B)
            valid[0] = N
            feats = rng.normal(size=(B, T0, cfg.feat_dim))
            dec = random_dec_in(rng, cfg, N, valid)
            with no_grad():
                base = model.forward(feats, frames, dec, valid).logits.data
                for j in range(1, N):
                    pert = dec.copy()
                    pert[:, j] = 2 + (pert[:, j] - 1) % (cfg.vocab_size - 2)
                    out = model.forward(feats, frames, pert, valid).logits.data
                    assert out[:, :j].tobytes() == base[:, :j].tobytes(), (i, v, j)
                    checked += 1
        elapsed = time.perf_counter() - t0
        assert elapsed < 60, f"took {elapsed:.1f}s"
        return f"{checked} perturbations, {elapsed:.1f}s"

    report(capsys, 1, "leak-freedom", check)


def test_c2_prefix_consistency(capsys):
    def check():
        t0 = time.perf_counter()
        rng = np.random.default_rng(202)
        worst = 0.0
        for i in range(100):
            v = VARIANTS[i % 3]
            model = sharpened(ASRModel(random_config(rng, v), seed=i), scale=float(rng.uniform(1, 6)))
            feats = rng.normal(size=(int(rng.integers(2, 21)), model.cfg.feat_dim))
            r = greedy_decode(model, feats, max_len=int(rng.integers(1, 8)), keep_logits=True)
            tf = teacher_forced_logits(model, feats, [SOS_EOS_ID] + r.token_ids[:-1])
            worst = max(worst, float(np.abs(tf - r.step_logits).max()))
        elapsed = time.perf_counter() - t0
        assert worst <= PREFIX_TOL, worst
        assert elapsed < 60, f"took {elapsed:.1f}s"
        return f"max |diff| {worst:.2e}, {elapsed:.1f}s"

    report(capsys, 2, "prefix consistency", check)


def test_c3_acoustic_track(capsys):
    def check():
        rng = np.random.default_rng(303)
        for i in range(20):
            cfg = random_config(rng, "ascd")
            model = ASRModel(cfg, seed=i)
            feats = rng.normal(size=(1, 12, cfg.feat_dim))
            with no_grad():
                a = model.forward(feats, [12], random_dec_in(rng, cfg, 5, [5]), [5]).acoustic.data
                b = model.forward(feats, [12], random_dec_in(rng, cfg, 5, [5]), [5]).acoustic.data
            assert a.tobytes() == b.tobytes()

            semi = ASRModel(random_config(rng, "s-ascd"), seed=i)
            with no_grad():
                out = semi.forward(rng.normal(size=(1, 12, semi.cfg.feat_dim)), [12],
                                   random_dec_in(rng, semi.cfg, 4, [4]), [4], keep_states=True)
            first = out.states[0][0].tobytes()
            assert all(acoustic.tobytes() == first for acoustic, _ in out.states)
            assert out.acoustic.data.tobytes() == first
        return "20 ascd + 20 s-ascd models"

    report(capsys, 3, "acoustic-track independence and copy-through", check)


def test_c4_mask_oracles(capsys):
    def check():
        n = 0
        for T, N, vt, vn in all_instances(8):
            ascd = M.build_ascd_mask(T, N, vt, vn).blocked
            oracle = np.array(
                [[expected_blocked(T, N, vt, vn, q, k) for k in range(T + N)] for q in range(T + N)],
                dtype=bool,
            )
            assert (ascd == oracle).all(), (T, N, vt, vn)
            assert (M.build_s_ascd_mask(T, N, vt, vn).blocked == ascd[T:]).all(), (T, N, vt, vn)
            n += 1
        return f"{n} instances"

    report(capsys, 4, "mask oracles", check)


def test_c5_gradient_checks(capsys):
    def check():
        worst = 0.0
        ops = list(_op_cases(np.random.default_rng(0)))
        for op in ops:
            for seed in range(20):
                rng = np.random.default_rng(seed)
                fn, shapes = _op_cases(rng)[op]
                params = [(f"x{k}", Parameter(rng.normal(size=s))) for k, s in enumerate(shapes)]
                if op == "relu":
                    params[0][1].data += np.sign(params[0][1].data) * 0.1
                err = check_gradients(lambda: fn(*(p for _, p in params)).sum(), params, step=GRAD_STEP)
                assert err < GRAD_TOL, (op, seed, err)
                worst = max(worst, err)
        rng = np.random.default_rng(5)
        for v in VARIANTS:
            cfg = ModelConfig(d_model=4, d_embed=4, d_ff=6, n_heads=2, n_encoder_layers=1,
                              n_decoder_layers=2, vocab_size=5, feat_dim=3, variant=v, max_positions=32)
            model = ASRModel(cfg, seed=1)
            batch = pad_and_batch([random_utterance(rng, cfg, 6, 2), random_utterance(rng, cfg, 4, 1)])
            err = check_gradients(lambda: model.loss(batch), model.named_parameters(), step=GRAD_STEP)
            assert err < GRAD_TOL, (v, err)
            worst = max(worst, err)
        return f"{len(ops)} ops + 3 variant losses, worst {worst:.1e}"

    report(capsys, 5, "gradient checks", check)


def test_c6_complexity(capsys):
    def check():
        rep = count_attention_elements(ModelConfig(), 10, 5)
        assert rep.score_elements == {"vanilla": 75, "ascd": 225, "s-ascd": 75}
        rng = np.random.default_rng(606)
        for i in range(50):
            v = VARIANTS[i % 3]
            cfg = random_config(rng, v)
            T, N = int(rng.integers(1, 11)), int(rng.integers(1, 7))
            scores, _ = instrumented_counts(ASRModel(cfg, seed=i), T, N, seed=i)
            assert scores == count_attention_elements(cfg, T, N, variants=[v]).layer_score_elements[v]
        return "T=10,N=5: ascd 225, s-ascd 75, vanilla 75"

    report(capsys, 6, "complexity claim", check)


def test_c7_parameter_claim(capsys):
    def check():
        assert cli_main(["count", "params"]) == 0
        out = capsys.readouterr().out
        assert f"vanilla - ascd: {TABLE1_DELTA:,}" in out, out
        rng = np.random.default_rng(707)
        for _ in range(100):
            base = random_config(rng, "ascd").to_dict()
            counts = {v: count_parameters(ModelConfig(**{**base, "variant": v})).total for v in VARIANTS}
            assert counts["ascd"] == counts["s-ascd"] < counts["vanilla"]
        return f"delta {TABLE1_DELTA:,}"

    report(capsys, 7, "parameter claim", check)


@pytest.fixture(scope="module")
def toy_corpus():
    spec = SyntheticSpec(vocab_size=16, n_train=2000, n_dev=200, n_test=200, noise=0.1)
    return spec, {s: synthesize_split(spec, s) for s in ("train", "dev", "test")}


@pytest.mark.slow
def test_c8_end_to_end(toy_corpus, capsys):
    spec, splits = toy_corpus
    results = {}

    def check():
        for v in VARIANTS:
            cfg = ModelConfig(variant=v, vocab_size=spec.model_vocab_size, feat_dim=spec.feat_dim, **E2E_MODEL)
            model = ASRModel(cfg, seed=0)
            trainer = Trainer(model, splits["train"], splits["dev"], TrainConfig(**E2E_TRAIN))
            best = {"cer": np.inf, "state": None}
            evaluate = trainer.evaluate

            def keep_best(window, evaluate=evaluate, best=best, model=model):
                entry = evaluate(window)
                if entry["dev_CER"] < best["cer"]:
                    best["cer"], best["state"] = entry["dev_CER"], model.state_dict()
                return entry

            trainer.evaluate = keep_best
            t0 = time.perf_counter()
            trainer.run()
            elapsed = time.perf_counter() - t0
            model.load_state_dict(best["state"])
            test_cer = evaluate_cer(model, splits["test"]).cer
            first = trainer.losses[0]
            at_2000 = float(np.mean(trainer.losses[1900:2000]))
            results[v] = dict(cer=test_cer, seconds=elapsed, steps=len(trainer.losses), loss_ratio=at_2000 / first)
            with capsys.disabled():
                print(f"\n  {v}: test CER {test_cer:.4f}, dev CER {best['cer']:.4f}, "
                      f"{elapsed:.0f}s, loss ratio at 2000 {at_2000 / first:.3f}")
        for v, r in results.items():
            assert r["steps"] <= E2E_MAX_STEPS and r["seconds"] <= E2E_MAX_SECONDS, (v, r)
            assert r["loss_ratio"] < LOSS_RATIO_AT_2000, (v, r)
            assert r["cer"] <= E2E_MAX_CER, (v, r)
        for v in ("ascd", "s-ascd"):
            assert results[v]["cer"] <= results["vanilla"]["cer"] + E2E_VANILLA_MARGIN, results
        return ", ".join(f"{v} {r['cer']:.3f}" for v, r in results.items())

    report(capsys, 8, "end-to-end toy task", check)


def test_c9_beam_correctness(capsys):
    def check():
        rng = np.random.default_rng(909)
        for i in range(60):
            v = VARIANTS[i % 3]
            model = sharpened(ASRModel(random_config(rng, v), seed=i), scale=float(rng.uniform(1, 6)))
            feats = rng.normal(size=(int(rng.integers(2, 14)), model.cfg.feat_dim))
            g = greedy_decode(model, feats, max_len=6)
            b = beam_decode(model, feats, beam=1, max_len=6)
            assert repr((b.token_ids, b.log_probs, b.score, b.truncated)) == repr(
                (g.token_ids, g.log_probs, g.score, g.truncated)
            )
        for i, penalty in itertools.product(range(3), (0.0, 1.0)):
            cfg = ModelConfig(d_model=4, d_embed=4, d_ff=4, n_heads=1, n_encoder_layers=1, n_decoder_layers=1,
                              vocab_size=4, feat_dim=3, variant=VARIANTS[i], max_positions=32)
            model = sharpened(ASRModel(cfg, seed=i), scale=2.0)
            feats = rng.normal(size=(6, 3))
            full = beam_decode(model, feats, beam=81, max_len=4, length_penalty=penalty)
            got = normalized_score(full.score, len(full.token_ids), penalty)
            assert got == pytest.approx(test_inference.TestBeam.brute_force(model, feats, 4, penalty), abs=1e-12)
        return "60 greedy equivalences, 6 exhaustive searches"

    report(capsys, 9, "beam correctness", check)


def test_c10_padding_invariance(capsys):
    def check():
        rng = np.random.default_rng(1010)
        worst = 0.0
        for i in range(30):
            v = VARIANTS[i % 3]
            cfg = random_config(rng, v)
            model = ASRModel(cfg, seed=i)
            utts = [random_utterance(rng, cfg, int(rng.integers(2, 16)), int(rng.integers(1, 6)))
                    for _ in range(int(rng.integers(2, 5)))]
            with no_grad():
                batched = float(model.loss(pad_and_batch(utts)).data)
                singles = np.mean([float(model.loss(pad_and_batch([u])).data) for u in utts])
            worst = max(worst, abs(batched - singles))

            u = utts[0]
            padded = np.concatenate([u.features, rng.normal(size=(5, cfg.feat_dim))])
            a = greedy_decode(model, padded, valid_frames=u.num_frames, max_len=5)
            padded[u.num_frames:] = rng.normal(size=(5, cfg.feat_dim)) * 100
            b = greedy_decode(model, padded, valid_frames=u.num_frames, max_len=5)
            assert (a.token_ids, a.score) == (b.token_ids, b.score)
        assert worst < PADDING_TOL, worst
        return f"max loss diff {worst:.1e}"

    report(capsys, 10, "padding invariance", check)
