"""Pinhole camera geometry: intrinsics, SE(3) transforms from axis-angle
6-vectors, and differentiable back-project / transform / reproject / sample
warping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import grid_sample
from .tensor import (
    ArgumentError,
    ContractError,
    DimensionError,
    Tensor,
    as_tensor,
    concat,
    cos,
    matmul,
    reshape,
    sin,
    sqrt,
    tsum,
    where,
)


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ArgumentError(f"focal lengths must be positive, got {self.fx}, {self.fy}")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def inverse(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def flipped(self, width: int) -> "CameraIntrinsics":
        """Intrinsics after a horizontal image flip."""
        return CameraIntrinsics(self.fx, self.fy, width - 1 - self.cx, self.cy)

    def scaled(self, sx: float, sy: float) -> "CameraIntrinsics":
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy)


@dataclass
class Pose:
    """Rigid transform x' = R x + t (rotation orthonormal, det +1)."""

    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_vector(v) -> "Pose":
        v = np.asarray(v, dtype=np.float64)
        R = _rodrigues(v[:3])
        return Pose(R, v[3:6].copy())

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """Transform applying ``other`` first, then ``self``."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def orthonormality_defect(self) -> float:
        return float(np.abs(self.rotation.T @ self.rotation - np.eye(3)).max())


def _rodrigues(w: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        return np.eye(3)
    k = w / theta
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(theta) * K + (1 - np.cos(theta)) * (K @ K)


def pose_from_vector_tensor(v: Tensor) -> tuple[Tensor, Tensor]:
    """Differentiable (B, 6) axis-angle+translation -> rotation (B,3,3), t (B,3).

    The (1-cos)/theta^2 factor multiplies a quadratic in w, so the small
    epsilon inside the norm cannot perturb the transform at w = 0.
    """
    v = as_tensor(v)
    if v.ndim != 2 or v.shape[1] != 6:
        raise DimensionError(f"pose vector must be (B, 6), got {v.shape}")
    B = v.shape[0]
    w = v[:, 0:3]
    t = v[:, 3:6]
    # epsilon large enough that its square does not underflow in the
    # division backward, small enough to be invisible next to real motion
    theta2 = tsum(w * w, axis=1, keepdims=True)
    theta = sqrt(theta2 + 1e-30)
    a = sin(theta) / theta                     # -> 1 as theta -> 0
    b = (1.0 - cos(theta)) / (theta2 + 1e-30)  # -> 1/2; harmless at w = 0
    z = Tensor(np.zeros((B, 1)))
    w0, w1, w2 = w[:, 0:1], w[:, 1:2], w[:, 2:3]
    skew = reshape(
        concat([z, -w2, w1, w2, z, -w0, -w1, w0, z], axis=1), (B, 3, 3)
    )
    eye = Tensor(np.broadcast_to(np.eye(3), (B, 3, 3)).copy())
    a3 = reshape(a, (B, 1, 1))
    b3 = reshape(b, (B, 1, 1))
    R = eye + skew * a3 + matmul(skew, skew) * b3
    return R, t


def pixel_grid(H: int, W: int) -> np.ndarray:
    """Homogeneous pixel coordinates, shape (3, H*W), row-major over pixels."""
    u, v = np.meshgrid(np.arange(W, dtype=np.float64),
                       np.arange(H, dtype=np.float64))
    return np.stack([u.reshape(-1), v.reshape(-1), np.ones(H * W)])


def project_and_warp(
    source: Tensor,
    depth: Tensor,
    pose,
    K: CameraIntrinsics,
) -> tuple[Tensor, Tensor]:
    """Back-project target pixels through ``depth``, move them by ``pose``,
    reproject into the source camera and sample it bilinearly.

    ``pose`` is either a :class:`Pose` or a differentiable (R, t) tensor
    pair. Returns the warped image and a {0,1} validity mask (zero where
    the reprojection leaves the source frame or lands behind the camera).
    """
    source, depth = as_tensor(source), as_tensor(depth)
    B, C, H, W = source.shape
    if depth.shape != (B, 1, H, W):
        raise DimensionError(f"depth shape {depth.shape} != ({B}, 1, {H}, {W})")
    if depth.data.min() <= 0:
        raise ContractError("depth must be strictly positive everywhere")
    if isinstance(pose, Pose):
        R = Tensor(np.broadcast_to(pose.rotation, (B, 3, 3)).copy())
        t = Tensor(np.broadcast_to(pose.translation, (B, 3)).copy())
    else:
        R, t = pose

    rays = Tensor(K.inverse() @ pixel_grid(H, W))        # (3, N)
    cam = rays * reshape(depth, (B, 1, H * W))           # (B, 3, N)
    moved = matmul(R, cam) + reshape(t, (B, 3, 1))
    proj = matmul(Tensor(K.matrix()), moved)             # (B, 3, N)
    z = proj[:, 2:3, :]
    in_front = z.data > 1e-6
    z_safe = where(in_front, z, Tensor(np.full_like(z.data, 1e-6)))
    u = reshape(proj[:, 0:1, :] / z_safe, (B, H, W))
    v = reshape(proj[:, 1:2, :] / z_safe, (B, H, W))

    warped = grid_sample(source, u, v)
    tol = 1e-9  # keep exact-boundary pixels valid under fp round-off
    valid = (
        in_front.reshape(B, 1, H, W)
        & (u.data >= -tol)[:, None] & (u.data <= W - 1 + tol)[:, None]
        & (v.data >= -tol)[:, None] & (v.data <= H - 1 + tol)[:, None]
    )
    return warped, Tensor(valid.astype(np.float64))


def disp_to_depth(disp: Tensor, min_depth: float = 0.1, max_depth: float = 100.0) -> Tensor:
    """Monotone map from sigmoid disparity in (0,1) to metric depth.

    depth = 1 / (1/max + (1/min - 1/max) * disp), range (min_depth, max_depth).
    """
    if not (0 < min_depth < max_depth):
        raise ArgumentError(f"need 0 < min_depth < max_depth, got {min_depth}, {max_depth}")
    disp = as_tensor(disp)
    lo = 1.0 / max_depth
    span = 1.0 / min_depth - lo
    return 1.0 / (disp * span + lo)
