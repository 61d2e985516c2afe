"""Attention cost accounting for the three decoder variants.

Analytic counts come from shape arithmetic; :func:`instrumented_counts` runs
a real forward pass under :class:`~ascd.tensor.OpCounter` so the two can be
compared exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .model import VARIANTS, ASRModel, ModelConfig, SOS_EOS_ID
from .tensor import OpCounter, no_grad


@dataclass
class FlopReport:
    T: int
    N: int
    n_heads: int
    n_layers: int
    # score-matrix elements per head per layer, by variant
    score_elements: dict[str, int] = field(default_factory=dict)
    # per-layer breakdowns (all heads), by variant
    layer_score_elements: dict[str, list[int]] = field(default_factory=dict)
    layer_macs: dict[str, list[int]] = field(default_factory=dict)

    def total_score_elements(self, variant: str) -> int:
        return sum(self.layer_score_elements[variant])

    def total_macs(self, variant: str) -> int:
        return sum(self.layer_macs[variant])

    def to_dict(self) -> dict:
        return asdict(self)


def score_elements_per_head(variant: str, T: int, N: int) -> int:
    L = T + N
    if variant == "ascd":
        return L * L
    if variant == "s-ascd":
        return N * L
    if variant == "vanilla":
        return N * N + N * T
    raise ValueError(f"unknown variant {variant!r}")


def layer_macs(variant: str, T: int, N: int, d_model: int, d_ff: int) -> int:
    """Matmul multiply-adds of one decoder layer for a single utterance."""
    D, L = d_model, T + N
    if variant == "ascd":
        return 4 * L * D * D + 2 * L * L * D + 2 * L * D * d_ff
    if variant == "s-ascd":
        return 2 * N * D * D + 2 * L * D * D + 2 * N * L * D + 2 * N * D * d_ff
    if variant == "vanilla":
        self_attn = 4 * N * D * D + 2 * N * N * D
        cross_attn = 2 * N * D * D + 2 * T * D * D + 2 * N * T * D
        return self_attn + cross_attn + 2 * N * D * d_ff
    raise ValueError(f"unknown variant {variant!r}")


def count_attention_elements(cfg: ModelConfig, T: int, N: int, variants=VARIANTS) -> FlopReport:
    if T < 0 or N < 1:
        raise ValueError(f"need T >= 0 and N >= 1, got T={T}, N={N}")
    report = FlopReport(T, N, cfg.n_heads, cfg.n_decoder_layers)
    for v in variants:
        per_head = score_elements_per_head(v, T, N)
        report.score_elements[v] = per_head
        report.layer_score_elements[v] = [cfg.n_heads * per_head] * cfg.n_decoder_layers
        report.layer_macs[v] = [layer_macs(v, T, N, cfg.d_model, cfg.d_ff)] * cfg.n_decoder_layers
    return report


def instrumented_counts(model: ASRModel, T: int, N: int, seed: int = 0) -> tuple[list[int], list[int]]:
    """Run one teacher-forced pass with ``T`` stacked frames and ``N`` decoder inputs.

    Returns per-decoder-layer ``(score_elements, macs)`` as counted inside the ops.
    """
    if T < 1:
        raise ValueError("the encoder needs at least one stacked frame")
    rng = np.random.default_rng(seed)
    cfg = model.cfg
    features = rng.normal(size=(1, 2 * T, cfg.feat_dim))
    dec_in = rng.integers(0, cfg.vocab_size, size=(1, N))
    dec_in[0, 0] = SOS_EOS_ID
    with no_grad(), OpCounter() as counter:
        model.forward(features, [2 * T], dec_in, [N])
    keys = [f"decoder.layers.{i}" for i in range(cfg.n_decoder_layers)]
    return (
        [counter.score_elements.get(k, 0) for k in keys],
        [counter.macs.get(k, 0) for k in keys],
    )
