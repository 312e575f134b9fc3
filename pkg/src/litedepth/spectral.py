"""Frequency-domain feature path: differentiable 2-D FFT, the learnable
low-pass mask, the purification map, and the global-feature branch with its
explicit spatial-convolution oracle.

The spectrum is stored unshifted (DC at index 0). The mask is constructed in
centered normalized coordinates and inverse-shifted once at build time, so
data tensors are never shifted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fft import fft2_raw, is_pow2, next_pow2
from .tensor import (
    ArgumentError,
    DimensionError,
    Tensor,
    as_tensor,
    concat,
    gelu,
    pad_zero,
    take,
)
from .ops import channel_shuffle, channel_split, conv2d, normalize
from . import flops as _flops


@dataclass
class ComplexPlanes:
    """Real/imaginary planes of a spectrum, kept as two real tensors."""

    real: Tensor
    imag: Tensor

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise DimensionError(
                f"real/imag shapes differ: {self.real.shape} vs {self.imag.shape}"
            )

    @property
    def shape(self):
        return self.real.shape


def fft2(x: Tensor) -> ComplexPlanes:
    """Per-channel 2-D DFT of a real tensor over its last two axes.

    The transform is linear, so each output plane back-propagates through
    the adjoint transform (an unnormalized inverse FFT).
    """
    x = as_tensor(x)
    h, w = x.shape[-2:]
    if not (is_pow2(h) and is_pow2(w)):
        raise DimensionError(
            f"spatial dimensions must be powers of two, got {h}x{w}; use pad_to_pow2"
        )
    spec = fft2_raw(x.data.astype(np.complex128))
    n = h * w

    def back_real(g):
        return (fft2_raw(g.astype(np.complex128), inverse=True).real * n,)

    def back_imag(g):
        return (fft2_raw((1j * g).astype(np.complex128), inverse=True).real * n,)

    return ComplexPlanes(
        Tensor._make(spec.real.copy(), (x,), back_real),
        Tensor._make(spec.imag.copy(), (x,), back_imag),
    )


def ifft2(s: ComplexPlanes) -> Tensor:
    """Real plane of the inverse 2-D transform of a spectrum."""
    re, im = as_tensor(s.real), as_tensor(s.imag)
    if re.shape != im.shape:
        raise DimensionError(f"real/imag shapes differ: {re.shape} vs {im.shape}")
    h, w = re.shape[-2:]
    n = h * w
    out = fft2_raw(re.data + 1j * im.data, inverse=True).real

    def back(g):
        gs = fft2_raw(g.astype(np.complex128)) / n
        return gs.real, gs.imag

    return Tensor._make(out, (re, im), back)


def pad_to_pow2(x: Tensor) -> tuple[Tensor, tuple[int, int]]:
    """Zero-pad the spatial axes up to the next power of two."""
    h, w = x.shape[-2:]
    ph, pw = next_pow2(h), next_pow2(w)
    if (ph, pw) == (h, w):
        return x, (h, w)
    pads = [(0, 0)] * (x.ndim - 2) + [(0, ph - h), (0, pw - w)]
    return pad_zero(x, pads), (h, w)


def crop_spatial(x: Tensor, size: tuple[int, int]) -> Tensor:
    h, w = size
    if x.shape[-2:] == (h, w):
        return x
    return take(x, np.s_[..., :h, :w])


@dataclass
class LowPassMask:
    """Learnable per-frequency gate, initialized as a hard radial cutoff.

    ``mask`` is stored in unshifted (DC-at-zero) spectrum indexing and is
    clamped to [0, 1] after every optimizer step. ``frozen`` keeps the hard
    0/1 initialization fixed, for ablations.
    """

    mask: Tensor
    cutoff_gamma: float
    frozen: bool = False


def radius_grid(h: int, w: int) -> np.ndarray:
    """Centered normalized frequency radii rho(u, v) = sqrt(u^2 + v^2)."""
    u = (np.arange(h) - h // 2) / h
    v = (np.arange(w) - w // 2) / w
    return np.sqrt(u[:, None] ** 2 + v[None, :] ** 2)


def build_mask(C: int, H: int, W: int, gamma: float, frozen: bool = False) -> LowPassMask:
    """Hard low-pass mask: 1 where rho <= gamma * max(rho), else 0."""
    if not (0.0 <= gamma <= 1.0):
        raise ArgumentError(f"cutoff gamma must lie in [0, 1], got {gamma}")
    rho = radius_grid(H, W)
    hard = (rho <= gamma * rho.max()).astype(np.float64)
    hard = np.fft.ifftshift(hard)  # align with the unshifted spectrum layout
    data = np.broadcast_to(hard, (C, H, W)).copy()
    return LowPassMask(Tensor(data, requires_grad=not frozen), gamma, frozen)


def purify(
    s: ComplexPlanes,
    mask: LowPassMask,
    conv_real: Tensor,
    conv_imag: Tensor,
    bn_real: dict,
    bn_imag: dict,
    training: bool = True,
) -> ComplexPlanes:
    """Mask, GELU, per-branch batch-norm, and 1x1 convolution on each plane.

    The real and imaginary branches share structure but keep independent
    batch-norm statistics and weights.
    """
    C = s.real.shape[1]
    if mask.mask.shape != s.real.shape[1:]:
        raise DimensionError(
            f"mask shape {mask.mask.shape} does not match spectrum {s.real.shape[1:]}"
        )
    m = mask.mask.reshape(1, *mask.mask.shape)

    def branch(plane: Tensor, w: Tensor, bn: dict) -> Tensor:
        y = gelu(plane * m)
        y = normalize(
            y, "batch", bn["gain"], bn["bias"],
            running_stats=bn["stats"], training=training,
        )
        return conv2d(y, w)

    return ComplexPlanes(
        branch(s.real, conv_real, bn_real),
        branch(s.imag, conv_imag, bn_imag),
    )


def complex_mul(a: ComplexPlanes, b: ComplexPlanes) -> ComplexPlanes:
    return ComplexPlanes(
        a.real * b.real - a.imag * b.imag,
        a.real * b.imag + a.imag * b.real,
    )


def dfsp_global(x: Tensor, mask: LowPassMask, params, training: bool = True) -> Tensor:
    """Frequency branch of the global-feature block.

    Splits a channel-shuffled input, runs the second half through the
    purified-spectrum Hadamard product, convolves the first half spatially,
    and fuses the two with a pointwise convolution. ``params`` is a
    :class:`~litedepth.encoder.SpectralPurifyBlock`-style parameter bundle
    exposing ``conv_first``, ``conv_real``, ``conv_imag``, ``bn_real``,
    ``bn_imag``, ``fuse_w``, ``fuse_b`` and the compensation ``gate``.
    """
    C = x.shape[1]
    if C % 2 != 0:
        raise DimensionError(f"global-feature block needs even channels, got {C}")
    shuffled = channel_shuffle(x, 2)
    first, second = channel_split(shuffled)
    tilde = frequency_product(second, mask, params, training)
    local = conv2d(first, params.conv_first, padding=1)
    fused = concat([local, tilde * params.gate], axis=1)
    return conv2d(fused, params.fuse_w, params.fuse_b)


def frequency_product(x_s: Tensor, mask: LowPassMask, params, training: bool = True) -> Tensor:
    """F^-1((P o F(x_s)) (.) F(x_s)) on power-of-two (padded) spatial dims."""
    x_p, size = pad_to_pow2(x_s)
    spec = fft2(x_p)
    pur = purify(
        spec, mask, params.conv_real, params.conv_imag,
        params.bn_real, params.bn_imag, training,
    )
    out = ifft2(complex_mul(pur, spec))
    return crop_spatial(out, size)


def dynamic_kernel(x_s: Tensor, mask: LowPassMask, params, training: bool = True) -> ComplexPlanes:
    """Spatial-domain kernel F^-1(P o F(x_s)) implied by the frequency path."""
    x_p, _ = pad_to_pow2(x_s)
    spec = fft2(x_p)
    pur = purify(
        spec, mask, params.conv_real, params.conv_imag,
        params.bn_real, params.bn_imag, training,
    )
    h, w = x_p.shape[-2:]
    full = fft2_raw(pur.real.data + 1j * pur.imag.data, inverse=True)
    return ComplexPlanes(Tensor(full.real), Tensor(full.imag))


def circular_conv2d(kernel: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Explicit periodic convolution (k * x)[n] = sum_m k[m] x[(n-m) mod N]."""
    h, w = x.shape[-2:]
    out = np.zeros(np.broadcast_shapes(kernel.shape, x.shape), dtype=np.result_type(kernel, x))
    for dh in range(h):
        for dw in range(w):
            out += kernel[..., dh, dw, None, None] * np.roll(x, (dh, dw), axis=(-2, -1))
    return out


def spatial_oracle(x_s: Tensor, mask: LowPassMask, params, training: bool = True) -> Tensor:
    """Equivalence oracle: the frequency product evaluated as an explicit
    circular spatial convolution with the dynamic kernel."""
    x_p, size = pad_to_pow2(x_s)
    k = dynamic_kernel(x_s, mask, params, training)
    out = circular_conv2d(k.real.data, x_p.data)
    return crop_spatial(Tensor(out), size)


def parseval_gap(x: np.ndarray) -> float:
    """Relative defect of sum(x^2) == sum(|F(x)|^2) / (H*W)."""
    h, w = x.shape[-2:]
    spec = fft2_raw(x.astype(np.complex128))
    spatial = float((x**2).sum())
    freq = float((np.abs(spec) ** 2).sum()) / (h * w)
    return abs(spatial - freq) / max(abs(spatial), 1e-30)
