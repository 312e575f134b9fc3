"""Training-time image augmentation on frame triplets.

Each transform fires independently with probability 0.5. Color jitter uses
one shared draw for all three frames so the photometric loss stays
consistent; the horizontal flip also mirrors the principal point.
Results are clamped to [0, 1].

Jitter models: brightness is additive (x + b); contrast and saturation are
multiplicative about the luminance mean and the per-pixel gray value
respectively; hue blends toward a cyclic RGB channel rotation.
"""

from __future__ import annotations

import numpy as np

from .geometry import CameraIntrinsics


def _hue_rotate(x: np.ndarray, h: float) -> np.ndarray:
    rolled = np.roll(x, 1 if h > 0 else -1, axis=1)
    return (1.0 - abs(h)) * x + abs(h) * rolled


def augment(
    triplet: tuple[np.ndarray, np.ndarray, np.ndarray],
    K: CameraIntrinsics,
    rng: np.random.Generator,
) -> tuple[tuple[np.ndarray, np.ndarray, np.ndarray], CameraIntrinsics]:
    """Jitter a (prev, target, next) triplet of B x 3 x H x W arrays."""
    frames = [f.copy() for f in triplet]
    W = frames[0].shape[-1]

    if rng.random() < 0.5:
        frames = [f[..., ::-1].copy() for f in frames]
        K = K.flipped(W)

    if rng.random() < 0.5:  # contrast, about the shared luminance mean
        c = rng.uniform(-0.2, 0.2)
        mean = frames[1].mean()
        frames = [mean + (f - mean) * (1.0 + c) for f in frames]

    if rng.random() < 0.5:  # brightness
        b = rng.uniform(-0.2, 0.2)
        frames = [f + b for f in frames]

    if rng.random() < 0.5:  # saturation, about the per-pixel gray value
        s = rng.uniform(-0.2, 0.2)
        frames = [
            f.mean(axis=1, keepdims=True) + (f - f.mean(axis=1, keepdims=True)) * (1.0 + s)
            for f in frames
        ]

    if rng.random() < 0.5:  # hue
        h = rng.uniform(-0.1, 0.1)
        frames = [_hue_rotate(f, h) for f in frames]

    frames = [np.clip(f, 0.0, 1.0) for f in frames]
    return (frames[0], frames[1], frames[2]), K
