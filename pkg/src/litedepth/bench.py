"""Scaling benchmark: the spectral global path against single-head
dot-product attention on equal token counts.

Wall-clock runs are pinned to one BLAS thread for slope stability; analytic
operation counts are reported alongside so the asymptotic separation can be
confirmed independently of timing noise.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .encoder import SpectralPurifyBlock
from .tensor import ArgumentError, Tensor, no_grad

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover - present in the pinned environment
    from contextlib import nullcontext

    def threadpool_limits(*a, **k):
        return nullcontext()


@dataclass
class BenchmarkCurve:
    label: str
    tokens: list[int] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    op_counts: list[int] = field(default_factory=list)

    @property
    def wall_slope(self) -> float:
        return _loglog_slope(self.tokens, self.seconds)

    @property
    def count_slope(self) -> float:
        return _loglog_slope(self.tokens, self.op_counts)

    def rows(self):
        for n, s, c in zip(self.tokens, self.seconds, self.op_counts):
            yield {"label": self.label, "tokens": n, "seconds": s, "op_count": c}


def _loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs, float)),
                            np.log(np.asarray(ys, float)), 1)[0])


def attention_reference(x: np.ndarray) -> np.ndarray:
    """Minimal single-head scaled dot-product attention over (N, d) tokens."""
    n, d = x.shape
    scores = (x @ x.T) / np.sqrt(d)
    scores -= scores.max(axis=1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=1, keepdims=True)
    return scores @ x


def attention_macs(n: int, d: int) -> int:
    # two N x N x d products; the softmax is O(N^2) and excluded like
    # other elementwise work
    return 2 * n * n * d


def dfsp_macs(n: int, c: int) -> int:
    """Analytic count for the global path on n = H*W tokens, c channels.

    Three transforms (forward, forward-of-product side handled by the shared
    spectrum, inverse) at 2.5*n*log2(n) MAC-equivalents per plane on c/2
    channels, plus the 1x1 purification convs (n * (c/2)^2 each), the 3x3
    local conv and the pointwise fusion.
    """
    half = c // 2
    fft_part = 3 * half * int(2.5 * n * np.log2(n))
    conv_part = 2 * n * half * half        # two 1x1 purification convs
    local = n * half * half * 9            # 3x3 conv on the bypass half
    fuse = n * c * c
    return fft_part + conv_part + local + fuse


def _time_call(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_complexity(
    sizes,
    channels: int = 8,
    repeats: int = 3,
    attention_sizes=None,
    seed: int = 0,
) -> tuple[BenchmarkCurve, BenchmarkCurve]:
    """Wall-time and analytic-count curves for the spectral global path and
    the attention reference. ``sizes`` are token counts (H*W), powers of two
    with even square roots; attention may use a truncated size list (its
    quadratic memory would otherwise dominate the run)."""
    sizes = list(sizes)
    if len(sizes) < 5:
        raise ArgumentError(f"need at least 5 sizes, got {len(sizes)}")
    for n in sizes:
        if n & (n - 1):
            raise ArgumentError(f"token counts must be powers of two, got {n}")
    attention_sizes = list(attention_sizes) if attention_sizes is not None else sizes
    rng = np.random.default_rng(seed)

    dfsp_curve = BenchmarkCurve("dfsp-global")
    attn_curve = BenchmarkCurve("reference-attention")

    with threadpool_limits(limits=1):
        for n in sizes:
            h = int(np.sqrt(n))
            w = n // h
            block = SpectralPurifyBlock(channels, h, w, gamma=0.5).init_parameters(0)
            block.eval()
            x = Tensor(rng.normal(size=(1, channels, h, w)))
            with no_grad():
                block(x)  # warm up
                sec = _time_call(lambda: block(x), repeats)
            dfsp_curve.tokens.append(n)
            dfsp_curve.seconds.append(sec)
            dfsp_curve.op_counts.append(dfsp_macs(n, channels))
        for n in attention_sizes:
            tok = rng.normal(size=(n, channels))
            attention_reference(tok)
            sec = _time_call(lambda: attention_reference(tok), repeats)
            attn_curve.tokens.append(n)
            attn_curve.seconds.append(sec)
            attn_curve.op_counts.append(attention_macs(n, channels))
    return dfsp_curve, attn_curve


def curves_csv(curves) -> str:
    rows = ["label,tokens,seconds,op_count"]
    for curve in curves:
        for r in curve.rows():
            rows.append(f"{r['label']},{r['tokens']},{r['seconds']!r},{r['op_count']}")
    for curve in curves:
        rows.append(f"{curve.label}_slopes,,{curve.wall_slope!r},{curve.count_slope!r}")
    return "\n".join(rows) + "\n"
