"""Teacher-forced training: batching, Adam with warmup, clipping, the loop."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Utterance, perturb_utterance
from .inference import greedy_decode
from .metrics import corpus_cer
from .model import FIRST_TOKEN_ID, PAD_ID, ASRModel

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 16
    max_steps: int = 3000
    base_lr: float = 2e-3
    warmup_steps: int = 300
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-9
    clip_norm: float = 5.0
    seed: int = 0
    eval_every: int = 500
    augment: bool = False

    def __post_init__(self):
        if self.warmup_steps < 1:
            raise ValueError("warmup_steps must be >= 1")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")
        if self.batch_size < 1 or self.max_steps < 0 or self.eval_every < 1:
            raise ValueError("batch_size and eval_every must be >= 1, max_steps >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class UtteranceBatch:
    features: np.ndarray  # [B, T0max, F], zero padded
    frame_lengths: np.ndarray  # [B]
    token_ids: np.ndarray  # [B, Nmax], <pad> padded
    token_lengths: np.ndarray  # [B]
    ids: list[str] = dataclasses.field(default_factory=list)

    def __len__(self):
        return self.features.shape[0]


def pad_and_batch(utterances: Sequence[Utterance]) -> UtteranceBatch:
    if not utterances:
        raise ValueError("cannot batch an empty list of utterances")
    B = len(utterances)
    frame_lengths = np.array([u.features.shape[0] for u in utterances], dtype=np.int64)
    token_lengths = np.array([len(u.token_ids) for u in utterances], dtype=np.int64)
    feat_dim = utterances[0].features.shape[1]
    features = np.zeros((B, frame_lengths.max(), feat_dim))
    token_ids = np.full((B, token_lengths.max()), PAD_ID, dtype=np.int64)
    for b, u in enumerate(utterances):
        features[b, : frame_lengths[b]] = u.features
        token_ids[b, : token_lengths[b]] = u.token_ids
    return UtteranceBatch(features, frame_lengths, token_ids, token_lengths, [u.id for u in utterances])


def learning_rate(step: int, base_lr: float, warmup_steps: int) -> float:
    """Inverse-sqrt schedule peaking at ``base_lr`` when ``step == warmup_steps`` (steps from 1)."""
    step = max(step, 1)
    return base_lr * min(step**-0.5, step * warmup_steps**-1.5) * warmup_steps**0.5


def clip_grad_norm(params, max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``; return the pre-clip norm."""
    grads = [p.grad for p in params if p.grad is not None]
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


class Adam:
    def __init__(self, named_params, cfg: TrainConfig):
        self.params = dict(named_params)
        self.cfg = cfg
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    @property
    def lr(self) -> float:
        return learning_rate(self.step_count, self.cfg.base_lr, self.cfg.warmup_steps)

    def step(self):
        self.step_count += 1
        t = self.step_count
        lr = self.lr
        b1, b2, eps = self.cfg.beta1, self.cfg.beta2, self.cfg.adam_eps
        for name, p in self.params.items():
            if p.grad is None:
                continue
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * p.grad * p.grad
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.params:
            out[f"optim.m.{name}"] = self.m[name]
            out[f"optim.v.{name}"] = self.v[name]
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray], step: int):
        for name in self.params:
            self.m[name][...] = tensors[f"optim.m.{name}"]
            self.v[name][...] = tensors[f"optim.v.{name}"]
        self.step_count = step


class TrainingDiverged(RuntimeError):
    pass


def train_step(model: ASRModel, batch: UtteranceBatch, optimizer: Adam) -> float:
    """One forward/backward/clip/update; returns the pre-update batch loss."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    model.zero_grad()
    loss = model.loss(batch)
    value = float(loss.data)
    if not math.isfinite(value):
        raise TrainingDiverged(
            f"non-finite loss {value} at step {optimizer.step_count + 1} "
            f"on utterances {batch.ids}"
        )
    loss.backward()
    clip_grad_norm(model.parameters(), optimizer.cfg.clip_norm)
    optimizer.step()
    return value


def batch_indices(n: int, batch_size: int, seed: int, step: int) -> np.ndarray:
    """Indices for 0-based ``step``; each epoch is a fresh seeded permutation."""
    per_epoch = max(n // batch_size, 1)
    epoch, k = divmod(step, per_epoch)
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return order[k * batch_size : (k + 1) * batch_size]


def evaluate_cer(model: ASRModel, utterances: Sequence[Utterance]):
    pairs = []
    for u in utterances:
        hyp = greedy_decode(model, u.features).transcript
        pairs.append((u.token_ids, hyp))
    return corpus_cer(pairs)


def save_training_state(path, model: ASRModel, optimizer: Adam, extra: dict | None = None):
    tensors = model.state_dict()
    tensors.update(optimizer.state_tensors())
    meta = {"step": optimizer.step_count, "model_config": model.cfg.to_dict()}
    meta.update(extra or {})
    save_checkpoint(path, tensors, meta)


def load_training_state(path, model: ASRModel, optimizer: Adam | None = None) -> dict:
    tensors, meta = load_checkpoint(path)
    model.load_state_dict(tensors)
    meta = meta or {}
    if optimizer is not None:
        optimizer.load_state_tensors(tensors, int(meta.get("step", 0)))
    return meta


class Trainer:
    """Runs training with periodic dev-CER evaluation.

    Writes ``last.ckpt`` and ``best.ckpt`` (lowest dev CER) plus a JSON-lines
    ``train_log.jsonl`` under ``out_dir`` when one is given.
    """

    def __init__(self, model, train_set, dev_set, cfg: TrainConfig, out_dir=None):
        self.model = model
        self.train_set = list(train_set)
        self.dev_set = list(dev_set)
        self.cfg = cfg
        self.out_dir = None if out_dir is None else Path(out_dir)
        self.optimizer = Adam(model.named_parameters(), cfg)
        self.best_cer = math.inf
        self.history: list[dict] = []
        self.losses: list[float] = []

    def resume(self, checkpoint):
        meta = load_training_state(checkpoint, self.model, self.optimizer)
        self.best_cer = meta.get("best_cer", math.inf)
        if self.best_cer is None:
            self.best_cer = math.inf
        log.info("resumed from %s at step %d", checkpoint, self.optimizer.step_count)

    def _log(self, entry: dict):
        self.history.append(entry)
        log.info("%s", json.dumps(entry))
        if self.out_dir is not None:
            with open(self.out_dir / "train_log.jsonl", "a") as fh:
                fh.write(json.dumps(entry) + "\n")

    def evaluate(self, window: list[float]):
        step = self.optimizer.step_count
        report = evaluate_cer(self.model, self.dev_set) if self.dev_set else None
        dev_cer = None if report is None else report.cer
        entry = {
            "step": step,
            "lr": self.optimizer.lr,
            "train_loss": float(np.mean(window)) if window else None,
            "dev_CER": dev_cer,
        }
        self._log(entry)
        if self.out_dir is not None:
            improved = dev_cer is not None and dev_cer < self.best_cer
            if improved:
                self.best_cer = dev_cer
            extra = {"best_cer": None if math.isinf(self.best_cer) else self.best_cer}
            save_training_state(self.out_dir / "last.ckpt", self.model, self.optimizer, extra)
            if improved:
                save_training_state(self.out_dir / "best.ckpt", self.model, self.optimizer, extra)
        elif dev_cer is not None:
            self.best_cer = min(self.best_cer, dev_cer)
        return entry

    def run(self) -> list[dict]:
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        window: list[float] = []
        while self.optimizer.step_count < self.cfg.max_steps:
            step = self.optimizer.step_count
            idx = batch_indices(len(self.train_set), self.cfg.batch_size, self.cfg.seed, step)
            utts = [self.train_set[i] for i in idx]
            if self.cfg.augment:
                # fresh relabelling + frame trim per utterance, a pure function of (seed, step)
                rng = np.random.default_rng([self.cfg.seed, step, 1])
                n_symbols = self.model.cfg.vocab_size - FIRST_TOKEN_ID
                utts = [perturb_utterance(u, rng, n_symbols) for u in utts]
            batch = pad_and_batch(utts)
            loss = train_step(self.model, batch, self.optimizer)
            self.losses.append(loss)
            window.append(loss)
            if self.optimizer.step_count % self.cfg.eval_every == 0:
                self.evaluate(window)
                window = []
        if window:
            self.evaluate(window)
        return self.history
