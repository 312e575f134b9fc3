"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ArgumentError, NumericError, Tensor, tsum


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst_coordinate: tuple | None
    checked: int
    excluded: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def grad_check(
    f,
    x: Tensor,
    step: float = 1e-6,
    tol: float = 1e-5,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare the analytic gradient of ``f`` against central differences.

    ``f`` maps a tensor to a tensor of any shape; a fixed random projection
    reduces the output to a scalar so one backward pass yields the full
    gradient. Coordinates where the two one-sided differences disagree
    (a kink, e.g. a pooling tie) are flagged as excluded rather than failed.
    """
    if not (0.0 < step <= 1e-3):
        raise ArgumentError(f"step must lie in (0, 1e-3], got {step}")
    rng = rng or np.random.default_rng(12345)

    x0 = x.data.copy()
    probe = Tensor(x0, requires_grad=True)
    out = f(probe)
    r = rng.normal(size=out.shape)

    def scalar(arr: np.ndarray) -> float:
        val = float((f(Tensor(arr)).data * r).sum())
        if not np.isfinite(val):
            raise NumericError("non-finite value during finite differencing")
        return val

    loss = tsum(out * Tensor(r))
    loss.backward()
    analytic = probe.grad if probe.grad is not None else np.zeros_like(x0)
    if not np.all(np.isfinite(analytic)):
        bad = tuple(np.argwhere(~np.isfinite(analytic))[0])
        raise NumericError(f"non-finite analytic gradient at coordinate {bad}")

    base = scalar(x0)
    max_rel = 0.0
    worst = None
    excluded = []
    flat = x0.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        coord = tuple(np.unravel_index(i, x0.shape))
        flat[i] = orig + step
        fp = scalar(x0)
        flat[i] = orig - step
        fm = scalar(x0)
        flat[i] = orig
        fwd = (fp - base) / step
        bwd = (base - fm) / step
        kink = abs(fwd - bwd) / max(abs(fwd), abs(bwd), 1.0)
        if kink > 1e-3:
            excluded.append(coord)
            continue
        numeric = (fp - fm) / (2.0 * step)
        a = analytic.reshape(-1)[i]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
        if rel > max_rel:
            max_rel = rel
            worst = coord
    return GradCheckReport(
        passed=max_rel <= tol,
        max_rel_error=max_rel,
        worst_coordinate=worst,
        checked=flat.size - len(excluded),
        excluded=excluded,
    )
