"""Central finite-difference gradient verification.

The oracle used by the test suite: perturb individual input entries by a
small step, evaluate the scalar function twice, and compare the slope against
the analytic gradient from the tape. Independent of the backward
implementations it checks.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def finite_difference_grad(
    fn: Callable[[], Tensor],
    param: Tensor,
    entries: Sequence[tuple] | None = None,
    step: float = 1e-4,
) -> dict[tuple, float]:
    """Numeric d fn / d param[entry] for the given entries (all if None)."""
    if entries is None:
        entries = [tuple(idx) for idx in np.ndindex(*param.data.shape)] if param.data.ndim else [()]
    grads: dict[tuple, float] = {}
    for entry in entries:
        orig = param.data[entry]
        param.data[entry] = orig + step
        f_plus = fn().item()
        param.data[entry] = orig - step
        f_minus = fn().item()
        param.data[entry] = orig
        grads[entry] = (f_plus - f_minus) / (2.0 * step)
    return grads


def max_relative_error(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-4,
    max_entries_per_param: int = 24,
    rng: np.random.Generator | None = None,
    min_scale: float = 1e-6,
) -> float:
    """Worst relative disagreement between analytic and numeric gradients.

    Runs one forward+backward for the analytic side, then probes a random
    subset of entries per parameter with central differences. The relative
    error at an entry is |a - n| / max(|a|, |n|, min_scale).

    Probes where the function is locally non-smooth (a ReLU or sampling kink
    inside the difference stencil, detected by comparing the h and h/2
    estimates) are discarded: the oracle itself is invalid there. At least
    half of the probes must survive.
    """
    rng = rng or np.random.default_rng(0)
    for p in params:
        p.zero_grad()
    loss = fn()
    loss.backward()
    analytic = []
    for p in params:
        if p.grad is None:
            raise AssertionError("parameter received no gradient")
        analytic.append(p.grad.copy())

    worst = 0.0
    total = kept = 0
    for p, a in zip(params, analytic):
        n_total = int(np.prod(p.data.shape)) if p.data.ndim else 1
        if n_total <= max_entries_per_param:
            flat_ids = np.arange(n_total)
        else:
            flat_ids = rng.choice(n_total, size=max_entries_per_param, replace=False)
        entries = [np.unravel_index(i, p.data.shape) if p.data.ndim else () for i in flat_ids]
        numeric = finite_difference_grad(fn, p, entries, step=step)
        numeric_half = finite_difference_grad(fn, p, entries, step=step / 2)
        for entry, n_val in numeric.items():
            total += 1
            n_half = numeric_half[entry]
            smooth_scale = max(abs(n_val), abs(n_half), 1e-3)
            # a smooth probe's h vs h/2 estimates agree to ~1e-8 relative;
            # a kink inside the stencil shows up at ~1e-4 or worse
            if abs(n_val - n_half) > 1e-5 * smooth_scale:
                continue  # FD oracle unreliable at this entry
            kept += 1
            a_val = float(a[entry]) if p.data.ndim else float(a)
            denom = max(abs(a_val), abs(n_half), min_scale)
            worst = max(worst, abs(a_val - n_half) / denom)
    if kept < max(1, total // 2):
        raise AssertionError(f"too many non-smooth probes ({total - kept}/{total})")
    return worst
