"""Row-column radix-2 FFT kernels on raw complex arrays.

These operate on plain numpy complex128 data; the differentiable wrappers
live in :mod:`litedepth.spectral`. ``naive_dft2`` is the quadratic oracle
used by the test suite and deliberately shares no code with the fast path.
"""

from __future__ import annotations

import numpy as np

from .tensor import DimensionError
from . import flops as _flops


def is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def fft1d(z: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Iterative radix-2 transform along the last axis (power-of-two length)."""
    n = z.shape[-1]
    if not is_pow2(n):
        raise DimensionError(f"radix-2 FFT needs a power-of-two length, got {n}")
    a = np.ascontiguousarray(z, dtype=np.complex128)[..., _bit_reverse_indices(n)]
    size = 2
    sign = 1.0 if inverse else -1.0
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        a = a.reshape(a.shape[:-1] + (n // size, size))
        t = a[..., half:] * tw
        e = a[..., :half].copy()
        a[..., :half] = e + t
        a[..., half:] = e - t
        a = a.reshape(a.shape[:-2] + (n,))
        size *= 2
    if inverse:
        a = a / n
    return a


def fft2_raw(z: np.ndarray, inverse: bool = False) -> np.ndarray:
    """2-D transform over the last two axes via row then column 1-D passes."""
    h, w = z.shape[-2:]
    n = h * w
    a = fft1d(z, inverse)
    a = fft1d(np.swapaxes(a, -1, -2), inverse)
    planes = int(np.prod(z.shape[:-2])) if z.ndim > 2 else 1
    _flops.add_macs(int(planes * 2.5 * n * np.log2(n)), "fft")
    return np.swapaxes(a, -1, -2)


def naive_dft2(x: np.ndarray) -> np.ndarray:
    """Direct-sum O(N^2) 2-D DFT oracle: X[u,v] = sum x[h,w] e^{-2pi i(uh/H + vw/W)}."""
    h, w = x.shape[-2:]
    hh = np.arange(h)
    ww = np.arange(w)
    eh = np.exp(-2j * np.pi * np.outer(hh, hh) / h)
    ew = np.exp(-2j * np.pi * np.outer(ww, ww) / w)
    return np.einsum("uh,...hw,wv->...uv", eh, x, ew.T)


def naive_idft2(x: np.ndarray) -> np.ndarray:
    h, w = x.shape[-2:]
    hh = np.arange(h)
    ww = np.arange(w)
    eh = np.exp(2j * np.pi * np.outer(hh, hh) / h)
    ew = np.exp(2j * np.pi * np.outer(ww, ww) / w)
    return np.einsum("uh,...hw,wv->...uv", eh, x, ew.T) / (h * w)
