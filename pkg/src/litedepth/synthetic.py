"""Procedural scenes with exact analytic depth for desk-scale training.

A scene is a tilted textured plane in world coordinates observed by a short
camera track. Depth is the closed-form ray/plane intersection and texture is
an analytic function of the 3-D world point, so rendered triplets are exactly
consistent with the ground-truth depth and poses (no resampling involved).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, Pose, pixel_grid
from .tensor import ArgumentError


@dataclass
class SyntheticScene:
    plane_normal: np.ndarray        # unit normal, world frame
    plane_offset: float             # plane is n . X = offset
    texture_freqs: np.ndarray       # (M, 3) spatial frequencies
    texture_amps: np.ndarray        # (M, 3) per-channel amplitudes
    texture_phases: np.ndarray      # (M, 3)
    camera_track: list[Pose] = field(default_factory=list)  # camera -> world
    intrinsics: CameraIntrinsics | None = None
    image_size: tuple[int, int] = (64, 64)
    seed: int = 0

    def __len__(self):
        return len(self.camera_track)

    def relative_pose(self, t: int, s: int) -> Pose:
        """Transform taking frame-t camera coordinates into frame s."""
        return self.camera_track[s].inverse().compose(self.camera_track[t])

    def depth_map(self, t: int) -> np.ndarray:
        """Ray/plane intersection depth for every pixel of frame t."""
        H, W = self.image_size
        cam = self.camera_track[t]
        rays = self.intrinsics.inverse() @ pixel_grid(H, W)     # (3, N), z = 1
        dirs = cam.rotation @ rays
        denom = self.plane_normal @ dirs
        depth = (self.plane_offset - self.plane_normal @ cam.translation) / denom
        return depth.reshape(H, W)

    def texture_at(self, points: np.ndarray) -> np.ndarray:
        """Analytic RGB texture at world points, shape (3, N) -> (3, N)."""
        phase = self.texture_freqs @ points                      # (M, N)
        out = np.zeros((3, points.shape[1]))
        for c in range(3):
            out[c] = 0.5 + (
                self.texture_amps[:, c][:, None]
                * np.sin(2.0 * np.pi * phase + self.texture_phases[:, c][:, None])
            ).sum(axis=0)
        return np.clip(out, 0.0, 1.0)

    def render_frame(self, t: int) -> np.ndarray:
        H, W = self.image_size
        cam = self.camera_track[t]
        rays = self.intrinsics.inverse() @ pixel_grid(H, W)
        depth = self.depth_map(t).reshape(-1)
        points = cam.rotation @ (rays * depth) + cam.translation[:, None]
        return self.texture_at(points).reshape(3, H, W)


def render_scene(scene: SyntheticScene, t: int):
    """(I_prev, I_t, I_next, gt_depth) for target frame t."""
    if not (1 <= t <= len(scene) - 2):
        raise ArgumentError(
            f"frame {t} needs neighbors; track has {len(scene)} poses"
        )
    return (
        scene.render_frame(t - 1),
        scene.render_frame(t),
        scene.render_frame(t + 1),
        scene.depth_map(t),
    )


def default_intrinsics(size: tuple[int, int]) -> CameraIntrinsics:
    H, W = size
    return CameraIntrinsics(0.9 * W, 0.9 * W, (W - 1) / 2.0, (H - 1) / 2.0)


def make_scene(seed: int, size: tuple[int, int] = (64, 64), track_len: int = 8) -> SyntheticScene:
    """One random tilted-plane scene with a mostly-lateral camera track."""
    rng = np.random.default_rng(seed)
    n = np.array([rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35), 1.0])
    n /= np.linalg.norm(n)
    offset = rng.uniform(5.0, 10.0)

    # frequencies kept low enough that bilinear resampling of a rendered
    # frame stays photometrically consistent with the analytic texture
    m = 6
    freqs = rng.uniform(-0.35, 0.35, size=(m, 3))
    freqs[0] = [0.3, 0.08, 0.0]
    freqs[1] = [0.05, 0.32, 0.0]
    amps = rng.uniform(0.02, 0.12, size=(m, 3))
    amps *= 0.5 / amps.sum(axis=0, keepdims=True)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(m, 3))

    track = []
    position = np.zeros(3)
    direction = np.array([rng.uniform(0.22, 0.38) * rng.choice([-1.0, 1.0]),
                          rng.uniform(-0.06, 0.06),
                          rng.uniform(-0.06, 0.06)])
    for k in range(track_len):
        wob = 0.01 * rng.normal(size=3)
        rot = Pose.from_vector(np.concatenate([wob, np.zeros(3)])).rotation
        track.append(Pose(rot, position.copy()))
        position = position + direction
    return SyntheticScene(
        plane_normal=n,
        plane_offset=offset,
        texture_freqs=freqs,
        texture_amps=amps,
        texture_phases=phases,
        camera_track=track,
        intrinsics=default_intrinsics(size),
        image_size=size,
        seed=seed,
    )


def make_scene_set(n: int, seed: int, size: tuple[int, int] = (64, 64)) -> list[SyntheticScene]:
    return [make_scene(seed * 1000 + i, size) for i in range(n)]
