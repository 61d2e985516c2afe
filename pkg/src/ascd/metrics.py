"""Character error rate over token-id sequences."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np


def edit_distance(ref: Sequence, hyp: Sequence) -> int:
    """Levenshtein distance with unit substitution/insertion/deletion costs."""
    prev = np.arange(len(hyp) + 1)
    for i, r in enumerate(ref, start=1):
        cur = np.empty_like(prev)
        cur[0] = i
        for j, h in enumerate(hyp, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h))
        prev = cur
    return int(prev[-1])


def compute_cer(ref: Sequence, hyp: Sequence) -> float:
    if len(ref) == 0:
        raise ValueError("reference is empty; CER is undefined")
    return edit_distance(ref, hyp) / len(ref)


@dataclass
class CerReport:
    utts: int
    ref_len: int
    edits: int
    cer: float

    def to_dict(self) -> dict:
        return asdict(self)


def corpus_cer(pairs: Iterable[tuple[Sequence, Sequence]]) -> CerReport:
    """Total edits over total reference length."""
    utts = ref_len = edits = 0
    for ref, hyp in pairs:
        if len(ref) == 0:
            raise ValueError("reference is empty; CER is undefined")
        utts += 1
        ref_len += len(ref)
        edits += edit_distance(ref, hyp)
    return CerReport(utts, ref_len, edits, edits / ref_len if ref_len else 0.0)
