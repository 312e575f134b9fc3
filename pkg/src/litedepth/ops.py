"""Structured differentiable operations on 4-D feature maps.

Convolution is cross-correlation (the usual deep-learning convention) and is
evaluated as a loop over kernel taps, each tap a batched pointwise
contraction; the same loop drives the gradient scatter, so stride, dilation
and groups share one mechanism.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    ArgumentError,
    DimensionError,
    Tensor,
    as_tensor,
    concat,
    gelu,
    leaky_relu,
    scatter_add,
    sigmoid,
    sqrt,
    take,
    tmean,
)
from . import flops as _flops


def _out_size(n: int, k: int, stride: int, dilation: int, padding: int) -> int:
    eff = (k - 1) * dilation + 1
    if n + 2 * padding < eff:
        raise DimensionError(
            f"effective kernel {eff} exceeds padded spatial extent {n + 2 * padding}"
        )
    return (n + 2 * padding - eff) // stride + 1


def conv2d(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    stride: int = 1,
    dilation: int = 1,
    groups: int = 1,
    padding: int = 0,
) -> Tensor:
    """2-D grouped/dilated cross-correlation of a BCHW tensor.

    ``w`` has shape (out_channels, in_channels // groups, kh, kw).
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"conv2d expects 4-D input/weight, got {x.shape} / {w.shape}")
    B, C, H, W = x.shape
    O, Cg, kh, kw = w.shape
    if C % groups != 0 or O % groups != 0:
        raise DimensionError(
            f"channels (in={C}, out={O}) not divisible by groups={groups}"
        )
    if Cg != C // groups:
        raise DimensionError(
            f"weight in-channel axis {Cg} != in_channels/groups = {C // groups}"
        )
    OH = _out_size(H, kh, stride, dilation, padding)
    OW = _out_size(W, kw, stride, dilation, padding)
    G, Og = groups, O // groups

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    depthwise = Cg == 1 and Og == 1
    _flops.add_macs(B * OH * OW * O * Cg * kh * kw, "conv2d")
    parents = (x, w) if b is None else (x, w, b)

    def tap_slices(i, j):
        return (
            slice(i * dilation, i * dilation + (OH - 1) * stride + 1, stride),
            slice(j * dilation, j * dilation + (OW - 1) * stride + 1, stride),
        )

    if depthwise:
        out = np.zeros((B, C, OH, OW))
        wd = w.data  # (C, 1, kh, kw)
        for i in range(kh):
            for j in range(kw):
                hs, ws = tap_slices(i, j)
                out += xp[:, :, hs, ws] * wd[None, :, 0, i, j, None, None]
        if b is not None:
            b = as_tensor(b)
            out += b.data[None, :, None, None]

        def back(g):
            gx_p = np.zeros_like(xp)
            gw = np.zeros_like(wd)
            for i in range(kh):
                for j in range(kw):
                    hs, ws = tap_slices(i, j)
                    gw[:, 0, i, j] = np.einsum("bchw,bchw->c", xp[:, :, hs, ws], g)
                    gx_p[:, :, hs, ws] += g * wd[None, :, 0, i, j, None, None]
            gx = gx_p[:, :, padding : padding + H, padding : padding + W] if padding else gx_p
            grads = [gx, gw]
            if b is not None:
                grads.append(g.sum(axis=(0, 2, 3)))
            return tuple(grads)

        return Tensor._make(out, parents, back)

    # im2col + per-group GEMM: columns laid out (G, Cg*kh*kw, B*OH*OW)
    if kh == 1 and kw == 1 and stride == 1:
        cols = np.ascontiguousarray(xp.transpose(1, 0, 2, 3)).reshape(
            G, Cg, B * OH * OW
        )
    else:
        sB, sC, sH, sW = xp.strides
        win = np.lib.stride_tricks.as_strided(
            xp,
            shape=(C, kh, kw, B, OH, OW),
            strides=(sC, sH * dilation, sW * dilation, sB, sH * stride, sW * stride),
            writeable=False,
        )
        cols = np.ascontiguousarray(win).reshape(G, Cg * kh * kw, B * OH * OW)
    wg = w.data.reshape(G, Og, Cg * kh * kw)
    out = (
        np.matmul(wg, cols)
        .reshape(O, B, OH, OW)
        .transpose(1, 0, 2, 3)
        .copy()
    )
    if b is not None:
        b = as_tensor(b)
        if b.shape != (O,):
            raise DimensionError(f"bias shape {b.shape} != ({O},)")
        out += b.data[None, :, None, None]

    def back(g):
        gg = g.transpose(1, 0, 2, 3).reshape(G, Og, B * OH * OW)
        gw = np.matmul(gg, cols.swapaxes(1, 2)).reshape(O, Cg, kh, kw)
        gcols = np.matmul(wg.swapaxes(1, 2), gg).reshape(C, kh, kw, B, OH, OW)
        # accumulate channel-major to match gcols layout, transpose once
        gx_cb = np.zeros((C, B) + xp.shape[2:])
        for i in range(kh):
            for j in range(kw):
                hs, ws = tap_slices(i, j)
                gx_cb[:, :, hs, ws] += gcols[:, i, j]
        gx_p = gx_cb.transpose(1, 0, 2, 3)
        gx = gx_p[:, :, padding : padding + H, padding : padding + W]
        grads = [np.ascontiguousarray(gx), gw]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return Tensor._make(out, parents, back)


def channel_shuffle(x: Tensor, groups: int) -> Tensor:
    """Reshape-(groups, C/groups)-transpose-flatten channel permutation."""
    x = as_tensor(x)
    C = x.shape[1]
    if C % groups != 0:
        raise DimensionError(f"channel count {C} not divisible by groups={groups}")
    src = np.arange(C).reshape(groups, C // groups).T.reshape(-1)
    inv = np.argsort(src)

    def back(g):
        return (g[:, inv],)

    return Tensor._make(x.data[:, src], (x,), back)


def channel_split(x: Tensor) -> tuple[Tensor, Tensor]:
    """First half / second half along the channel axis."""
    x = as_tensor(x)
    C = x.shape[1]
    if C % 2 != 0:
        raise DimensionError(f"channel_split requires an even channel count, got {C}")
    return take(x, np.s_[:, : C // 2]), take(x, np.s_[:, C // 2 :])


def _window_view(x: np.ndarray, kh, kw, stride):
    B, C, H, W = x.shape
    OH = (H - kh) // stride + 1
    OW = (W - kw) // stride + 1
    sB, sC, sH, sW = x.strides
    return np.lib.stride_tricks.as_strided(
        x,
        shape=(B, C, OH, OW, kh, kw),
        strides=(sB, sC, sH * stride, sW * stride, sH, sW),
        writeable=False,
    )


def pool2d(
    x: Tensor,
    mode: str,
    window: int | tuple[int, int] | None = None,
    stride: int | None = None,
    output_size: int | tuple[int, int] | None = None,
) -> Tensor:
    """Windowed or adaptive max/avg pooling over the spatial axes.

    Max pooling routes the gradient to the first (row-major) maximal element
    of each window; average pooling spreads it uniformly.
    """
    x = as_tensor(x)
    if mode not in ("max", "avg"):
        raise ArgumentError(f"pool mode must be 'max' or 'avg', got {mode!r}")
    B, C, H, W = x.shape
    if output_size is not None:
        oh, ow = (output_size, output_size) if isinstance(output_size, int) else output_size
        if oh > H or ow > W:
            raise DimensionError(f"adaptive output {oh}x{ow} exceeds input {H}x{W}")
        if H % oh == 0 and W % ow == 0:
            kh, kw = H // oh, W // ow
            return _pool_uniform(x, mode, kh, kw, (kh, kw))
        return _pool_adaptive(x, mode, oh, ow)
    if window is None:
        raise ArgumentError("pool2d needs either a window or an output_size")
    kh, kw = (window, window) if isinstance(window, int) else window
    if kh <= 0 or kw <= 0:
        raise DimensionError(f"zero-size pooling window {kh}x{kw}")
    if kh > H or kw > W:
        raise DimensionError(f"pool window {kh}x{kw} exceeds input {H}x{W}")
    if stride is None:
        stride = kh if kh == kw else 1
    return _pool_uniform(x, mode, kh, kw, (stride, stride))


def _pool_uniform(x, mode, kh, kw, stride):
    sh, sw = stride
    if sh != sw:
        raise ArgumentError("anisotropic pooling stride not supported")
    B, C, H, W = x.shape
    win = _window_view(x.data, kh, kw, sh)
    OH, OW = win.shape[2:4]
    _flops.add_macs(B * C * OH * OW * kh * kw // 2, "pool2d")
    if mode == "avg":
        out = win.mean(axis=(4, 5))

        def back(g):
            gx = np.zeros_like(x.data)
            gs = g / (kh * kw)
            for i in range(kh):
                for j in range(kw):
                    gx[:, :, i : i + (OH - 1) * sh + 1 : sh, j : j + (OW - 1) * sw + 1 : sw] += gs
            return (gx,)

        return Tensor._make(out, (x,), back)

    flat = win.reshape(B, C, OH, OW, kh * kw)
    arg = flat.argmax(axis=-1)  # first max in row-major window order
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    bi, ci, hi, wi = np.ix_(np.arange(B), np.arange(C), np.arange(OH), np.arange(OW))
    hsrc = hi * sh + arg // kw
    wsrc = wi * sw + arg % kw
    flat_idx = ((bi * C + ci) * H + hsrc) * W + wsrc

    def back(g):
        return (scatter_add(x.data.shape, flat_idx, g),)

    return Tensor._make(out, (x,), back)


def _pool_adaptive(x, mode, oh, ow):
    # Non-divisible adaptive pooling: per-cell windows [floor(i*H/oh), ceil((i+1)*H/oh))
    B, C, H, W = x.shape
    hstart = (np.arange(oh) * H) // oh
    hend = -((-(np.arange(oh) + 1) * H) // oh)
    wstart = (np.arange(ow) * W) // ow
    wend = -((-(np.arange(ow) + 1) * W) // ow)
    out = np.zeros((B, C, oh, ow))
    cells = []
    for i in range(oh):
        for j in range(ow):
            patch = x.data[:, :, hstart[i] : hend[i], wstart[j] : wend[j]]
            if mode == "avg":
                out[:, :, i, j] = patch.mean(axis=(2, 3))
                cells.append((i, j, None))
            else:
                flat = patch.reshape(B, C, -1)
                arg = flat.argmax(axis=-1)
                out[:, :, i, j] = np.take_along_axis(flat, arg[..., None], -1)[..., 0]
                cells.append((i, j, arg))

    def back(g):
        gx = np.zeros_like(x.data)
        for i, j, arg in cells:
            hs, he = hstart[i], hend[i]
            ws, we = wstart[j], wend[j]
            if mode == "avg":
                gx[:, :, hs:he, ws:we] += (
                    g[:, :, i, j, None, None] / ((he - hs) * (we - ws))
                )
            else:
                pw = we - ws
                hi = hs + arg // pw
                wi = ws + arg % pw
                bi, ci = np.ix_(np.arange(B), np.arange(C))
                np.add.at(gx, (bi, ci, hi, wi), g[:, :, i, j])
        return (gx,)

    return Tensor._make(out, (x,), back)


def activation(x: Tensor, kind: str, slope: float = 0.01) -> Tensor:
    """Dispatch to leaky_relu / gelu / sigmoid; ``slope`` only affects leaky_relu."""
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    if kind == "gelu":
        return gelu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ArgumentError(f"unknown activation kind {kind!r}")


def _norm_fused(x: Tensor, gain: Tensor, bias: Tensor, eps: float, axes: tuple) -> Tensor:
    """Shared normalize-over-axes kernel with a hand-derived backward."""
    C = x.shape[1]
    n = int(np.prod([x.shape[a] for a in axes]))
    mu = x.data.mean(axis=axes, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gshape = (1, C) + (1,) * (x.ndim - 2)
    out = xhat * gain.data.reshape(gshape) + bias.data.reshape(gshape)
    reduce_gb = tuple(a for a in range(x.ndim) if a != 1)

    def back(g):
        ggain = (g * xhat).sum(axis=reduce_gb)
        gbias = g.sum(axis=reduce_gb)
        gxh = g * gain.data.reshape(gshape)
        gx = inv * (
            gxh
            - gxh.mean(axis=axes, keepdims=True)
            - xhat * (gxh * xhat).mean(axis=axes, keepdims=True)
        )
        return gx, ggain, gbias

    t = Tensor._make(out, (x, gain, bias), back)
    return t, mu, var, n


def normalize(
    x: Tensor,
    kind: str,
    gain: Tensor,
    bias: Tensor,
    eps: float = 1e-5,
    running_stats: dict | None = None,
    training: bool = True,
    momentum: float = 0.1,
) -> Tensor:
    """Layer (per-sample over channels) or batch (per-channel) normalization.

    Batch mode maintains ``running_stats`` ({'mean','var'}) for inference;
    the running variance is updated with the unbiased estimate.
    """
    x = as_tensor(x)
    C = x.shape[1]
    gain, bias = as_tensor(gain), as_tensor(bias)
    if gain.shape != (C,) or bias.shape != (C,):
        raise DimensionError(f"gain/bias shape must be ({C},), got {gain.shape}/{bias.shape}")
    if kind == "layer":
        if C == 0:
            raise DimensionError("zero-length normalization axis")
        out, _, _, _ = _norm_fused(x, gain, bias, eps, (1,))
        return out
    if kind != "batch":
        raise ArgumentError(f"unknown normalization kind {kind!r}")
    axes = (0,) + tuple(range(2, x.ndim))
    n = int(np.prod([x.shape[a] for a in axes]))
    if n == 0:
        raise DimensionError("zero-length normalization axis")
    if training or running_stats is None:
        out, mu, var, n = _norm_fused(x, gain, bias, eps, axes)
        if running_stats is not None:
            unbiased = var * (n / max(n - 1, 1))
            running_stats["mean"] *= 1.0 - momentum
            running_stats["mean"] += momentum * mu.reshape(C)
            running_stats["var"] *= 1.0 - momentum
            running_stats["var"] += momentum * unbiased.reshape(C)
        return out
    gshape = (1, C) + (1,) * (x.ndim - 2)
    mu = running_stats["mean"].reshape(gshape)
    inv = 1.0 / np.sqrt(running_stats["var"].reshape(gshape) + eps)
    xhat = (x - Tensor(mu)) * Tensor(inv)
    return xhat * gain.reshape(gshape) + bias.reshape(gshape)


def _resize_axis_indices(n_in: int, n_out: int):
    # align_corners=False sampling positions with edge clamping
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i0 = np.minimum(i0, n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    t = src - i0
    return i0, i1, t


def bilinear_upsample(x: Tensor, factor: int) -> Tensor:
    """Integer-factor bilinear upsampling (align_corners=False)."""
    if factor < 1:
        raise ArgumentError(f"upsample factor must be >= 1, got {factor}")
    x = as_tensor(x)
    if factor == 1:
        return x
    return resize_bilinear(x, (x.shape[2] * factor, x.shape[3] * factor))


def resize_bilinear(x: Tensor, size: tuple[int, int]) -> Tensor:
    x = as_tensor(x)
    B, C, H, W = x.shape
    OH, OW = size
    r0, r1, ty = _resize_axis_indices(H, OH)
    c0, c1, tx = _resize_axis_indices(W, OW)
    ty4 = ty[None, None, :, None]
    tx4 = tx[None, None, None, :]
    _flops.add_macs(B * C * OH * OW * 4, "resize")

    rows = x.data[:, :, r0, :] * (1 - ty4) + x.data[:, :, r1, :] * ty4
    out = rows[:, :, :, c0] * (1 - tx4) + rows[:, :, :, c1] * tx4

    def back(g):
        lead = np.arange(B * C * OH).reshape(B, C, OH, 1) * W
        grows = scatter_add((B, C, OH, W), lead + c0, g * (1 - tx4))
        grows += scatter_add((B, C, OH, W), lead + c1, g * tx4)
        grt = grows.transpose(0, 1, 3, 2)  # scatter over the row axis
        lead = np.arange(B * C * W).reshape(B, C, W, 1) * H
        gx = scatter_add((B, C, W, H), lead + r0, grt * (1 - ty4).transpose(0, 1, 3, 2))
        gx += scatter_add((B, C, W, H), lead + r1, grt * ty4.transpose(0, 1, 3, 2))
        return (gx.transpose(0, 1, 3, 2),)

    return Tensor._make(out, (x,), back)


def grid_sample(src: Tensor, u: Tensor, v: Tensor) -> Tensor:
    """Differentiable bilinear sampling of ``src`` at pixel coordinates (u, v).

    Coordinates are in pixels of ``src``; out-of-range samples are
    edge-clamped, which makes their coordinate gradient vanish naturally.
    """
    src, u, v = as_tensor(src), as_tensor(u), as_tensor(v)
    B, C, H, W = src.shape
    if u.shape != v.shape or u.shape[0] != B:
        raise DimensionError(f"coordinate shapes {u.shape}/{v.shape} incompatible with batch {B}")
    OH, OW = u.shape[1], u.shape[2]

    x0f = np.floor(u.data)
    y0f = np.floor(v.data)
    tx = u.data - x0f
    ty = v.data - y0f
    x0 = np.clip(x0f, 0, W - 1).astype(np.int64)
    x1 = np.clip(x0f + 1, 0, W - 1).astype(np.int64)
    y0 = np.clip(y0f, 0, H - 1).astype(np.int64)
    y1 = np.clip(y0f + 1, 0, H - 1).astype(np.int64)

    bi = np.arange(B)[:, None, None]
    s = src.data
    Ia = s[bi, :, y0, x0]  # (B, OH, OW, C)
    Ib = s[bi, :, y0, x1]
    Ic = s[bi, :, y1, x0]
    Id = s[bi, :, y1, x1]
    wa = ((1 - tx) * (1 - ty))[..., None]
    wb = (tx * (1 - ty))[..., None]
    wc = ((1 - tx) * ty)[..., None]
    wd = (tx * ty)[..., None]
    out = (Ia * wa + Ib * wb + Ic * wc + Id * wd).transpose(0, 3, 1, 2)
    _flops.add_macs(B * C * OH * OW * 4, "grid_sample")

    def back(g):
        gc = g.transpose(0, 2, 3, 1)  # (B, OH, OW, C)
        base = (bi * H)[..., None]  # (B,1,1,1) batch offset in (B,H,W,C) layout
        carr = np.arange(C)
        idx = (
            ((base + y0[..., None]) * W + x0[..., None]) * C + carr,
            ((base + y0[..., None]) * W + x1[..., None]) * C + carr,
            ((base + y1[..., None]) * W + x0[..., None]) * C + carr,
            ((base + y1[..., None]) * W + x1[..., None]) * C + carr,
        )
        vals = (gc * wa, gc * wb, gc * wc, gc * wd)
        gsrc = scatter_add(
            (B, H, W, C),
            np.concatenate([i.reshape(-1) for i in idx]),
            np.concatenate([v.reshape(-1) for v in vals]),
        ).transpose(0, 3, 1, 2)
        gu = (
            ((Ib - Ia) * (1 - ty)[..., None] + (Id - Ic) * ty[..., None]) * gc
        ).sum(axis=-1)
        gv = (
            ((Ic - Ia) * (1 - tx)[..., None] + (Id - Ib) * tx[..., None]) * gc
        ).sum(axis=-1)
        return gsrc, gu, gv

    return Tensor._make(out, (src, u, v), back)


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    if not training or p <= 0.0:
        return x
    x = as_tensor(x)
    keep = (rng.random(x.shape) >= p) / (1.0 - p)

    def back(g):
        return (g * keep,)

    return Tensor._make(x.data * keep, (x,), back)


def avg_filter3(x: Tensor) -> Tensor:
    """3x3 mean filter with reflect padding (stride 1), used by SSIM."""
    from .tensor import pad_reflect2d

    C = x.shape[1]
    w = Tensor(np.full((C, 1, 3, 3), 1.0 / 9.0))
    return conv2d(pad_reflect2d(x, 1), w, groups=C)
