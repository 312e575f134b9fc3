"""Self-supervised photometric objective: SSIM + L1 reprojection error with
per-pixel source minimum, the static-pixel auto-mask, edge-aware smoothness,
and the combined multi-scale loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, disp_to_depth, project_and_warp
from .ops import avg_filter3, bilinear_upsample
from .tensor import (
    ArgumentError,
    ContractError,
    DimensionError,
    Tensor,
    absolute,
    as_tensor,
    exp,
    minimum,
    tmean,
    tsum,
)

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass
class LossReport:
    total: Tensor
    photometric: float
    smoothness: float
    mask_fraction: float

    def value(self) -> float:
        return self.total.item()


def ssim(a: Tensor, b: Tensor) -> Tensor:
    """Per-pixel structural similarity with 3x3 mean filtering (values in [-1, 1])."""
    from .tensor import concat

    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"ssim shapes differ: {a.shape} vs {b.shape}")
    C = a.shape[1]
    # one filtering pass over the five moment maps
    stackd = concat([a, b, a * a, b * b, a * b], axis=1)
    f = avg_filter3(stackd)
    mu_a, mu_b = f[:, :C], f[:, C : 2 * C]
    sig_a = f[:, 2 * C : 3 * C] - mu_a * mu_a
    sig_b = f[:, 3 * C : 4 * C] - mu_b * mu_b
    sig_ab = f[:, 4 * C :] - mu_a * mu_b
    num = (mu_a * mu_b * 2.0 + SSIM_C1) * (sig_ab * 2.0 + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (sig_a + sig_b + SSIM_C2)
    return num / den


def photometric_error(a: Tensor, b: Tensor, alpha: float = 0.85) -> Tensor:
    """Channel-averaged (alpha/2)(1 - SSIM) + (1 - alpha) |a - b|, one map per pixel."""
    if not (0.0 <= alpha <= 1.0):
        raise ArgumentError(f"alpha must lie in [0, 1], got {alpha}")
    sim = ssim(a, b)
    l1 = absolute(a - b)
    per_channel = (1.0 - sim) * (alpha / 2.0) + l1 * (1.0 - alpha)
    return tmean(per_channel, axis=1, keepdims=True)


def min_reprojection(losses) -> Tensor:
    """Per-pixel minimum across source-frame loss maps; gradient reaches only
    the argmin (the earlier map on ties)."""
    losses = list(losses)
    if not losses:
        raise ArgumentError("min_reprojection needs at least one loss map")
    out = losses[0]
    for nxt in losses[1:]:
        if nxt.shape != out.shape:
            raise DimensionError(f"loss map shapes differ: {nxt.shape} vs {out.shape}")
        out = minimum(out, nxt)
    return out


def auto_mask(warped_losses, identity_losses) -> Tensor:
    """Binary static-pixel mask: 1 where the best warped loss strictly beats
    the best unwarped (identity) loss, 0 otherwise (ties excluded)."""
    w = min_reprojection(warped_losses)
    i = min_reprojection(identity_losses)
    if w.shape != i.shape:
        raise DimensionError(f"mask shapes differ: {w.shape} vs {i.shape}")
    return Tensor((w.data < i.data).astype(np.float64))


def smoothness_loss(disp: Tensor, image: Tensor) -> Tensor:
    """Edge-aware first-order smoothness of mean-normalized disparity."""
    disp, image = as_tensor(disp), as_tensor(image)
    if disp.shape[-2:] != image.shape[-2:]:
        raise DimensionError(
            f"disparity {disp.shape} and image {image.shape} spatial shapes differ"
        )
    m = tmean(disp, axis=(1, 2, 3), keepdims=True)
    if np.any(m.data <= 0):
        raise ContractError("smoothness_loss requires mean(disp) > 0")
    d = disp / m
    dx = absolute(d[:, :, :, 1:] - d[:, :, :, :-1])
    dy = absolute(d[:, :, 1:, :] - d[:, :, :-1, :])
    ix = tmean(absolute(image[:, :, :, 1:] - image[:, :, :, :-1]), axis=1, keepdims=True)
    iy = tmean(absolute(image[:, :, 1:, :] - image[:, :, :-1, :]), axis=1, keepdims=True)
    return tmean(dx * exp(-ix)) + tmean(dy * exp(-iy))


def total_loss(
    target: Tensor,
    sources,
    disparities,
    poses,
    K: CameraIntrinsics,
    lam: float = 1e-3,
    alpha: float = 0.85,
    min_depth: float = 0.1,
    max_depth: float = 100.0,
) -> LossReport:
    """Multi-scale masked photometric + weighted smoothness objective.

    Per scale the disparity is upsampled to full resolution and converted to
    depth; each source is warped into the target view; the per-pixel minimum
    over sources is masked by the static-pixel mask and by warp validity and
    averaged over the surviving pixels. Scales and batch are averaged.
    """
    sources = list(sources)
    poses = list(poses)
    if len(sources) != len(poses):
        raise DimensionError(f"{len(sources)} sources but {len(poses)} poses")
    B, C, H, W = target.shape

    identity_pe = [photometric_error(s, target, alpha) for s in sources]

    total = None
    photo_acc = 0.0
    smooth_acc = 0.0
    mask_acc = 0.0
    n_scales = len(disparities)
    for disp in disparities:
        factor = H // disp.shape[2]
        disp_full = bilinear_upsample(disp, factor) if factor > 1 else disp
        depth = disp_to_depth(disp_full, min_depth, max_depth)
        warped_pe = []
        valids = []
        for src, pose in zip(sources, poses):
            warped, valid = project_and_warp(src, depth, pose, K)
            warped_pe.append(photometric_error(warped, target, alpha))
            valids.append(valid.data)
        min_pe = min_reprojection(warped_pe)
        mu = auto_mask(warped_pe, identity_pe)
        seen = Tensor((np.stack(valids).sum(axis=0) > 0).astype(np.float64))
        weight = mu * seen
        denom = float(weight.data.sum())
        photo = tsum(min_pe * weight) / max(denom, 1.0)
        smooth = smoothness_loss(disp_full, target)
        term = photo + smooth * lam
        total = term if total is None else total + term
        photo_acc += photo.item()
        smooth_acc += smooth.item()
        mask_acc += float(mu.data.mean())
    total = total * (1.0 / n_scales)
    return LossReport(
        total=total,
        photometric=photo_acc / n_scales,
        smoothness=smooth_acc / n_scales,
        mask_fraction=mask_acc / n_scales,
    )
