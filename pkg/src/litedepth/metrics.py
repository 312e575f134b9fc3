"""Standard seven-number depth evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ContractError


@dataclass
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float

    def astuple(self):
        return (self.abs_rel, self.sq_rel, self.rmse, self.rmse_log,
                self.delta1, self.delta2, self.delta3)


def eigen_metrics(
    pred: np.ndarray,
    gt: np.ndarray,
    cap: float = 80.0,
    median_scale: bool = True,
) -> DepthMetrics:
    """Error/accuracy metrics over pixels with ground truth in (1e-3, cap].

    Median scaling (pred * median(gt)/median(pred)) resolves the monocular
    scale ambiguity; predictions are then clamped to [1e-3, cap].
    """
    pred = np.asarray(getattr(pred, "data", pred), dtype=np.float64).reshape(-1)
    gt = np.asarray(getattr(gt, "data", gt), dtype=np.float64).reshape(-1)
    valid = (gt > 1e-3) & (gt <= cap)
    if not valid.any():
        raise ContractError("no valid ground-truth pixels to evaluate")
    p = pred[valid]
    g = gt[valid]
    if median_scale:
        p = p * (np.median(g) / np.median(p))
    p = np.clip(p, 1e-3, cap)

    ratio = np.maximum(p / g, g / p)
    diff = p - g
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        rmse=float(np.sqrt(np.mean(diff**2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
    )


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rank correlation (average ranks on ties)."""
    def rank(x):
        order = np.argsort(x, kind="stable")
        ranks = np.empty(len(x))
        ranks[order] = np.arange(len(x), dtype=np.float64)
        # average tied groups
        sx = x[order]
        i = 0
        while i < len(sx):
            j = i
            while j + 1 < len(sx) and sx[j + 1] == sx[i]:
                j += 1
            if j > i:
                ranks[order[i : j + 1]] = 0.5 * (i + j)
            i = j + 1
        return ranks

    ra, rb = rank(a.reshape(-1)), rank(b.reshape(-1))
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra**2).sum() * (rb**2).sum())
    return float((ra * rb).sum() / denom) if denom > 0 else 0.0
