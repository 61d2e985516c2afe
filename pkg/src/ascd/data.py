"""Synthetic ASR-like corpus and the on-disk dataset format.

A split directory holds ``manifest.jsonl`` (one JSON object per utterance:
``id``, ``num_frames``, ``feat_dim``, ``token_ids``) and one ``<id>.f32``
file per utterance with row-major little-endian float32 features.  Token ids
in the manifest are model ids: real tokens start at ``FIRST_TOKEN_ID``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model import FIRST_TOKEN_ID

SPLITS = ("train", "dev", "test")
_F32 = np.dtype("<f4")


@dataclass
class SyntheticSpec:
    vocab_size: int = 16
    feat_dim: int | None = None
    min_tokens: int = 3
    max_tokens: int = 10
    min_frames_per_token: int = 2
    max_frames_per_token: int = 4
    noise: float = 0.1
    n_train: int = 2000
    n_dev: int = 200
    n_test: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.feat_dim is None:
            self.feat_dim = self.vocab_size + 4
        if self.feat_dim < self.vocab_size:
            raise ValueError(f"feat_dim={self.feat_dim} < vocab_size={self.vocab_size}")
        if not (1 <= self.min_tokens <= self.max_tokens):
            raise ValueError("empty token-count range")
        if not (1 <= self.min_frames_per_token <= self.max_frames_per_token):
            raise ValueError("empty frames-per-token range")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")

    @property
    def model_vocab_size(self) -> int:
        """Vocabulary size including ``<pad>`` and ``<sos/eos>``."""
        return self.vocab_size + FIRST_TOKEN_ID

    def counts(self) -> dict[str, int]:
        return {"train": self.n_train, "dev": self.n_dev, "test": self.n_test}


@dataclass
class Utterance:
    id: str
    features: np.ndarray
    token_ids: list[int] = field(default_factory=list)

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]


def synthesize_utterance(spec: SyntheticSpec, rng: np.random.Generator, utt_id: str) -> Utterance:
    n = int(rng.integers(spec.min_tokens, spec.max_tokens + 1))
    tokens = rng.integers(0, spec.vocab_size, size=n)
    repeats = rng.integers(spec.min_frames_per_token, spec.max_frames_per_token + 1, size=n)
    frames = np.repeat(tokens, repeats)
    features = np.zeros((frames.size, spec.feat_dim))
    features[np.arange(frames.size), frames] = 1.0
    if spec.noise > 0:
        features += rng.normal(0.0, spec.noise, size=features.shape)
    features = features.astype(np.float32)
    return Utterance(utt_id, features, [int(t) + FIRST_TOKEN_ID for t in tokens])


def perturb_utterance(utt: Utterance, rng: np.random.Generator, n_symbols: int) -> Utterance:
    """Label-preserving random copy of a synthetic utterance, for augmentation.

    The ``n_symbols`` token classes are relabelled by a random permutation
    (their one-hot feature channels move with them), and 0 or 1 frame is
    trimmed from each end, which changes how frames pair up under 2x
    stacking.  Both leave the generator's distribution unchanged as long as
    every token spans at least 2 frames.
    """
    if utt.features.shape[1] < n_symbols:
        raise ValueError(f"{utt.id}: feat_dim {utt.features.shape[1]} < {n_symbols} symbols")
    perm = rng.permutation(n_symbols)
    features = utt.features.copy()
    features[:, perm] = utt.features[:, :n_symbols]
    tokens = [int(perm[t - FIRST_TOKEN_ID]) + FIRST_TOKEN_ID for t in utt.token_ids]
    start, cut = (int(v) for v in rng.integers(0, 2, size=2))
    n = features.shape[0]
    if len(tokens) < 2 or n - start - cut < 2:
        start = cut = 0
    features = features[start : n - cut]
    return Utterance(utt.id, features, tokens)


def synthesize_split(spec: SyntheticSpec, split: str) -> list[Utterance]:
    rng = np.random.default_rng([spec.seed, SPLITS.index(split)])
    return [synthesize_utterance(spec, rng, f"{split}-{i:05d}") for i in range(spec.counts()[split])]


def write_split(directory, utterances: list[Utterance]):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for utt in utterances:
        features = np.ascontiguousarray(utt.features, dtype=_F32)
        try:
            (directory / f"{utt.id}.f32").write_bytes(features.tobytes())
        except OSError as exc:
            raise OSError(f"cannot write features for {utt.id} under {directory}: {exc}") from exc
        record = {
            "id": utt.id,
            "num_frames": int(features.shape[0]),
            "feat_dim": int(features.shape[1]),
            "token_ids": [int(t) for t in utt.token_ids],
        }
        lines.append(json.dumps(record))
    (directory / "manifest.jsonl").write_text("".join(line + "\n" for line in lines))


def read_manifest(path) -> list[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.jsonl"
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def read_split(directory) -> list[Utterance]:
    """Load a split; features come back as float64 (exact widening of the stored float32)."""
    directory = Path(directory)
    utterances = []
    for entry in read_manifest(directory):
        path = directory / f"{entry['id']}.f32"
        try:
            raw = np.fromfile(path, dtype=_F32)
        except OSError as exc:
            raise OSError(f"cannot read features {path}: {exc}") from exc
        expected = entry["num_frames"] * entry["feat_dim"]
        if raw.size != expected:
            raise ValueError(f"{path}: {raw.size} values, manifest says {expected}")
        features = raw.reshape(entry["num_frames"], entry["feat_dim"]).astype(np.float64)
        utterances.append(Utterance(entry["id"], features, list(entry["token_ids"])))
    return utterances


def generate_corpus(spec: SyntheticSpec, out_dir) -> Path:
    """Write ``train``/``dev``/``test`` splits plus ``spec.json`` under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for split in SPLITS:
        write_split(out_dir / split, synthesize_split(spec, split))
    (out_dir / "spec.json").write_text(json.dumps(asdict(spec), indent=2, sort_keys=True) + "\n")
    return out_dir


def load_spec(out_dir) -> SyntheticSpec:
    return SyntheticSpec(**json.loads((Path(out_dir) / "spec.json").read_text()))


def nearest_onehot_transcript(features: np.ndarray, vocab_size: int) -> list[int]:
    """Collapse runs of the argmax one-hot channel into tokens.

    Only exact for noiseless data without adjacent repeated tokens; used as a
    separability sanity check, not as a recognizer.
    """
    best = np.argmax(features[:, :vocab_size], axis=1)
    tokens = [int(best[0])]
    for b in best[1:]:
        if b != tokens[-1]:
            tokens.append(int(b))
    return [t + FIRST_TOKEN_ID for t in tokens]
