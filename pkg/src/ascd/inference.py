"""Autoregressive greedy and beam decoding plus attention capture.

Decoding never caches semantic keys/values: every step re-runs the decoder
on the whole prefix.  Only the acoustic side is computed once per utterance
(for ASCD this is the full per-layer acoustic track, which cannot depend on
tokens because acoustic queries never see semantic keys).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import PAD_ID, SOS_EOS_ID, ASRModel, AttentionRecord
from .tensor import log_softmax, no_grad


@dataclass
class DecodeResult:
    token_ids: list[int]
    log_probs: list[float]
    score: float
    truncated: bool = False
    step_logits: np.ndarray | None = None
    records: list[AttentionRecord] = field(default_factory=list)

    @property
    def transcript(self) -> list[int]:
        """Emitted tokens without the terminating ``<eos>``."""
        if self.token_ids and self.token_ids[-1] == SOS_EOS_ID:
            return self.token_ids[:-1]
        return list(self.token_ids)


def _encode_one(model: ASRModel, features, valid_frames):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 3:
        if features.shape[0] != 1:
            raise ValueError("decode one utterance at a time")
        features = features[0]
    valid = features.shape[0] if valid_frames is None else int(valid_frames)
    acoustic, _ = model.encode(features[None, :valid], [valid])
    return acoustic


def default_max_len(model: ASRModel, T: int) -> int:
    limit = T + 1
    if model.variant != "vanilla":
        limit = min(limit, model.cfg.max_positions - T)
    return max(limit, 1)


def _step_log_probs(logits: np.ndarray) -> np.ndarray:
    lp = log_softmax(logits)
    lp[PAD_ID] = -np.inf
    return lp


def greedy_decode(
    model: ASRModel,
    features,
    valid_frames=None,
    max_len: int | None = None,
    precompute: bool = True,
    keep_logits: bool = False,
) -> DecodeResult:
    """Argmax decoding from ``<sos>`` until ``<eos>`` or ``max_len`` tokens.

    With ``precompute=False`` the acoustic track is rebuilt at every step
    (used to check that the one-shot precomputation is sound).
    """
    with no_grad():
        acoustic = _encode_one(model, features, valid_frames)
        max_len = default_max_len(model, acoustic.shape[1]) if max_len is None else max_len
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        track = model.acoustic_track(acoustic) if precompute else None
        prefix = [SOS_EOS_ID]
        tokens, log_probs, logits_seen = [], [], []
        score = 0.0
        for _ in range(max_len):
            step_track = track if precompute else model.acoustic_track(acoustic)
            logits = model.prefix_logits(step_track, prefix)[-1]
            if keep_logits:
                logits_seen.append(logits)
            lp = _step_log_probs(logits)
            tok = int(np.argmax(lp))
            tokens.append(tok)
            log_probs.append(float(lp[tok]))
            score += lp[tok]
            if tok == SOS_EOS_ID:
                break
            prefix.append(tok)
    return DecodeResult(
        token_ids=tokens,
        log_probs=log_probs,
        score=float(score),
        truncated=tokens[-1] != SOS_EOS_ID,
        step_logits=np.array(logits_seen) if keep_logits else None,
    )


@dataclass
class _Hypothesis:
    tokens: list[int]
    log_probs: list[float]
    score: float


@dataclass
class BeamState:
    alive: list[_Hypothesis]
    finished: list[tuple[_Hypothesis, bool]]
    beam: int
    max_len: int


def normalized_score(score: float, length: int, length_penalty: float) -> float:
    return score / (length**length_penalty)


def beam_decode(
    model: ASRModel,
    features,
    valid_frames=None,
    beam: int = 4,
    max_len: int | None = None,
    length_penalty: float = 1.0,
) -> DecodeResult:
    """Beam search ranked by ``score / len**length_penalty`` among finished hypotheses.

    Candidates are ordered by accumulated log-prob, then by the step
    log-prob, then by hypothesis order and token id, so ``beam=1`` follows
    exactly the greedy path.  Hypotheses still alive at ``max_len`` finish
    as truncated.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    with no_grad():
        acoustic = _encode_one(model, features, valid_frames)
        max_len = default_max_len(model, acoustic.shape[1]) if max_len is None else max_len
        track = model.acoustic_track(acoustic)
        state = BeamState([_Hypothesis([], [], 0.0)], [], beam, max_len)
        for _ in range(max_len):
            candidates = []
            for hi, hyp in enumerate(state.alive):
                lp = _step_log_probs(model.prefix_logits(track, [SOS_EOS_ID] + hyp.tokens)[-1])
                for tok in range(lp.size):
                    if tok == PAD_ID:
                        continue
                    candidates.append((hyp.score + lp[tok], lp[tok], hi, tok))
            candidates.sort(key=lambda c: (-c[0], -c[1], c[2], c[3]))
            alive = []
            for total, step_lp, hi, tok in candidates[:beam]:
                parent = state.alive[hi]
                hyp = _Hypothesis(parent.tokens + [tok], parent.log_probs + [float(step_lp)], total)
                if tok == SOS_EOS_ID:
                    state.finished.append((hyp, False))
                else:
                    alive.append(hyp)
            state.alive = alive
            if not alive:
                break
        state.finished.extend((hyp, True) for hyp in state.alive)

    best, truncated = max(
        state.finished,
        key=lambda item: normalized_score(item[0].score, len(item[0].tokens), length_penalty),
    )
    return DecodeResult(best.tokens, best.log_probs, float(best.score), truncated)


def capture_attention(
    model: ASRModel, features, token_ids, valid_frames=None, include_encoder: bool = False
) -> list[AttentionRecord]:
    """Teacher-forced pass over ``[<sos>] + token_ids`` keeping every attention map."""
    features = np.asarray(features, dtype=np.float64)
    valid = features.shape[0] if valid_frames is None else int(valid_frames)
    dec_in = np.array([[SOS_EOS_ID] + [int(t) for t in token_ids]])
    with no_grad():
        out = model.forward(
            features[None, :valid], [valid], dec_in, [dec_in.shape[1]],
            capture=True, capture_encoder=include_encoder,
        )
    return out.records


def write_pgm(path, weights: np.ndarray):
    """8-bit binary greyscale, 255 at the map's maximum weight."""
    weights = np.asarray(weights, dtype=np.float64)
    peak = weights.max()
    scaled = np.zeros_like(weights) if peak <= 0 else weights / peak * 255.0
    pixels = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, dims, maxval, body = raw.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    w, h = (int(x) for x in dims.split())
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


def dump_attention(records: list[AttentionRecord], out_dir) -> list[Path]:
    """One CSV (header ``t_boundary=T``) and one PGM per record."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for rec in records:
        stem = f"{rec.kind}_layer{rec.layer}_head{rec.head}"
        if rec.utterance:
            stem += f"_utt{rec.utterance}"
        csv_path = out_dir / f"{stem}.csv"
        rows = [",".join(repr(float(x)) for x in row) for row in rec.weights]
        csv_path.write_text(f"t_boundary={rec.t_boundary}\n" + "\n".join(rows) + "\n")
        pgm_path = out_dir / f"{stem}.pgm"
        write_pgm(pgm_path, rec.weights)
        written += [csv_path, pgm_path]
    return written


def read_attention_csv(path) -> tuple[int, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines[0].startswith("t_boundary="):
        raise ValueError(f"{path}: missing t_boundary header")
    t = int(lines[0].split("=", 1)[1])
    return t, np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
