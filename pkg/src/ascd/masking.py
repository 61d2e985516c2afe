"""Attention masks over the concatenated [acoustic; semantic] sequence.

Queries index rows and keys index columns; ``True`` means the query may not
attend to that key.  Positions ``0..T-1`` are acoustic frames and
``T..T+N-1`` are semantic tokens.  The four query/key blocks are

* acoustic query, acoustic key: open
* acoustic query, semantic key: always blocked, so acoustic rows never
  carry token information forward (including ``<sos>`` at column T)
* semantic query, acoustic key: open
* semantic query i, semantic key j: blocked iff ``j > i``

The S-ASCD mask keeps only the semantic query rows, i.e. it is the
``N x (T+N)`` slice ``[T:]`` of the ASCD mask.  (The figure caption that
introduces it names the blocks it keeps differently; the row-slice reading
is the only one consistent with semantic-only queries.)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class AttentionMask:
    blocked: np.ndarray
    t_boundary: int
    n_semantic: int

    def __post_init__(self):
        blocked = np.asarray(self.blocked, dtype=bool)
        if blocked.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {blocked.shape}")
        if blocked.shape[1] != self.t_boundary + self.n_semantic:
            raise ValueError(
                f"{blocked.shape[1]} key columns but T + N = {self.t_boundary + self.n_semantic}"
            )
        blocked.setflags(write=False)
        object.__setattr__(self, "blocked", blocked)

    @property
    def shape(self) -> tuple[int, int]:
        return self.blocked.shape

    def __or__(self, other: "AttentionMask") -> "AttentionMask":
        _check_compatible(self, other)
        return AttentionMask(self.blocked | other.blocked, self.t_boundary, self.n_semantic)

    def __eq__(self, other):
        if not isinstance(other, AttentionMask):
            return NotImplemented
        return (
            self.t_boundary == other.t_boundary
            and self.n_semantic == other.n_semantic
            and self.blocked.shape == other.blocked.shape
            and bool(np.array_equal(self.blocked, other.blocked))
        )

    __hash__ = None


def _check_compatible(a: AttentionMask, b: AttentionMask):
    if a.shape != b.shape or a.t_boundary != b.t_boundary or a.n_semantic != b.n_semantic:
        raise ValueError(
            f"incompatible masks: shape {a.shape} (T={a.t_boundary}, N={a.n_semantic}) "
            f"vs {b.shape} (T={b.t_boundary}, N={b.n_semantic})"
        )


def _check_lengths(T, N, valid_T, valid_N):
    if T < 0 or N < 0:
        raise ValueError(f"negative lengths T={T}, N={N}")
    if not (0 <= valid_T <= T and 0 <= valid_N <= N):
        raise ValueError(f"valid lengths ({valid_T}, {valid_N}) exceed ({T}, {N})")


def build_causal_mask(T: int, N: int) -> AttentionMask:
    """Causal multimodal mask, ``(T+N) x (T+N)``."""
    if T < 0 or N < 1:
        raise ValueError(f"need T >= 0 and N >= 1, got T={T}, N={N}")
    L = T + N
    blocked = np.zeros((L, L), dtype=bool)
    blocked[:T, T:] = True
    blocked[T:, T:] = np.triu(np.ones((N, N), dtype=bool), k=1)
    return AttentionMask(blocked, T, N)


def build_padding_mask(T: int, N: int, valid_T: int, valid_N: int) -> AttentionMask:
    """Blocks padded key columns for every query."""
    _check_lengths(T, N, valid_T, valid_N)
    keys = key_padding(T, N, valid_T, valid_N)
    return AttentionMask(np.broadcast_to(keys, (T + N, T + N)).copy(), T, N)


def key_padding(T: int, N: int, valid_T: int, valid_N: int) -> np.ndarray:
    """Boolean row of length ``T+N``: True at padded acoustic/semantic keys."""
    keys = np.zeros(T + N, dtype=bool)
    keys[valid_T:T] = True
    keys[T + valid_N :] = True
    return keys


def compose_ascd_mask(causal: AttentionMask, padding: AttentionMask) -> AttentionMask:
    return causal | padding


def build_ascd_mask(T: int, N: int, valid_T: int | None = None, valid_N: int | None = None):
    valid_T = T if valid_T is None else valid_T
    valid_N = N if valid_N is None else valid_N
    return compose_ascd_mask(build_causal_mask(T, N), build_padding_mask(T, N, valid_T, valid_N))


def build_s_ascd_mask(T: int, N: int, valid_T: int | None = None, valid_N: int | None = None):
    """Semantic-query mask, ``N x (T+N)``."""
    valid_T = T if valid_T is None else valid_T
    valid_N = N if valid_N is None else valid_N
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    _check_lengths(T, N, valid_T, valid_N)
    blocked = np.zeros((N, T + N), dtype=bool)
    blocked[:, valid_T:T] = True
    i = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    blocked[:, T:] = (j > i) | (j >= valid_N)
    return AttentionMask(blocked, T, N)


# plain (non-multimodal) masks used by the encoder and the vanilla decoder


def self_attention_padding(n: int, valid: int) -> np.ndarray:
    blocked = np.zeros((n, n), dtype=bool)
    blocked[:, valid:] = True
    return blocked


def causal_self_mask(n: int, valid: int | None = None) -> np.ndarray:
    valid = n if valid is None else valid
    blocked = np.triu(np.ones((n, n), dtype=bool), k=1)
    blocked[:, valid:] = True
    return blocked


def cross_padding_mask(n_query: int, n_key: int, valid_key: int) -> np.ndarray:
    blocked = np.zeros((n_query, n_key), dtype=bool)
    blocked[:, valid_key:] = True
    return blocked


# text dump used for golden files


def format_mask(mask: AttentionMask, valid_T: int, valid_N: int, variant: str) -> str:
    lines = [f"{mask.t_boundary} {mask.n_semantic} {valid_T} {valid_N} {variant}"]
    lines += ["".join("1" if b else "0" for b in row) for row in mask.blocked]
    return "\n".join(lines) + "\n"


def parse_mask(text: str) -> tuple[AttentionMask, int, int, str]:
    lines = text.strip("\n").split("\n")
    t, n, vt, vn, variant = lines[0].split()
    rows = [[c == "1" for c in line] for line in lines[1:]]
    blocked = np.array(rows, dtype=bool).reshape(len(rows), int(t) + int(n))
    return AttentionMask(blocked, int(t), int(n)), int(vt), int(vn), variant


def dump_mask(path, mask: AttentionMask, valid_T: int, valid_N: int, variant: str):
    Path(path).write_text(format_mask(mask, valid_T, valid_N, variant))


def load_mask(path):
    return parse_mask(Path(path).read_text())
