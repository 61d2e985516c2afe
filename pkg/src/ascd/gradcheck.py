"""Central-difference gradient checking against the reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .tensor import Tensor, no_grad


def check_gradients(
    f: Callable[[], Tensor],
    params: Iterable[tuple[str, Tensor]] | dict[str, Tensor],
    step: float = 1e-6,
    floor: float = 1e-5,
) -> float:
    """Worst relative error between backprop and central differences.

    ``f`` is re-evaluated with each parameter entry nudged by ``±step``; the
    relative error per entry is ``|a - n| / max(|a|, |n|, floor)``, where the
    floor keeps near-zero gradients from amplifying finite-difference noise.
    Raises ``FloatingPointError`` naming the parameter if ``f`` goes non-finite.
    """
    named = list(params.items() if isinstance(params, dict) else params)
    for _, p in named:
        p.grad = None
    loss = f()
    if not np.isfinite(loss.data).all():
        raise FloatingPointError("objective is non-finite at the evaluation point")
    loss.backward()

    worst = 0.0
    for name, p in named:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            with no_grad():
                flat[i] = original + step
                plus = float(f().data)
                flat[i] = original - step
                minus = float(f().data)
            flat[i] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise FloatingPointError(f"non-finite objective while perturbing {name}[{i}]")
            numeric = (plus - minus) / (2.0 * step)
            a = float(analytic.reshape(-1)[i])
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
    return worst
