"""Core data types: splats, scenes, cameras and images.

Scene fields may hold numpy arrays or torch tensors. Tensor-valued scenes
are produced inside differentiable code paths (fitting, dynamics, planning)
and carry autograd history; everything else uses numpy.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import torch

DTYPE = torch.float64


def as_tensor(x) -> torch.Tensor:
    """Convert to a float64 tensor, passing existing float64 tensors through."""
    if isinstance(x, torch.Tensor):
        return x if x.dtype == DTYPE else x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=DTYPE)


def as_numpy(x) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().numpy().astype(np.float64)
    return np.asarray(x, dtype=np.float64)


def normalize_quat(q):
    if isinstance(q, torch.Tensor):
        return q / torch.linalg.norm(q, dim=-1, keepdim=True)
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_to_rotmat(q: torch.Tensor) -> torch.Tensor:
    """Rotation matrices for (..., 4) quaternions in (w, x, y, z) order.

    The input is normalized first, so raw unconstrained 4-vectors are fine.
    """
    q = normalize_quat(as_tensor(q))
    w, x, y, z = q.unbind(-1)
    rows = [
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ]
    return torch.stack(rows, -1).reshape(q.shape[:-1] + (3, 3))


def quat_multiply(a, b):
    """Hamilton product a * b for (..., 4) quaternions."""
    aw, ax, ay, az = a.unbind(-1)
    bw, bx, by, bz = b.unbind(-1)
    return torch.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], -1)


def quat_about_axis(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


@dataclass
class Splat:
    """One 3D Gaussian: position g, unit quaternion r (w,x,y,z), per-axis std-dev
    s, opacity sigma and RGB color c."""

    g: np.ndarray
    r: np.ndarray
    s: np.ndarray
    sigma: float
    c: np.ndarray

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=np.float64).reshape(3)
        self.r = np.asarray(self.r, dtype=np.float64).reshape(4)
        self.s = np.asarray(self.s, dtype=np.float64).reshape(3)
        self.c = np.asarray(self.c, dtype=np.float64).reshape(3)
        self.sigma = float(self.sigma)


@dataclass
class SplatScene:
    """An ordered set of splats stored column-wise.

    ``g`` (N,3), ``r`` (N,4), ``s`` (N,3), ``sigma`` (N,), ``c`` (N,3).
    """

    g: np.ndarray
    r: np.ndarray
    s: np.ndarray
    sigma: np.ndarray
    c: np.ndarray
    frame_id: int = 0

    def __post_init__(self):
        if not isinstance(self.g, torch.Tensor):
            self.g = np.asarray(self.g, dtype=np.float64).reshape(-1, 3)
            self.r = np.asarray(self.r, dtype=np.float64).reshape(-1, 4)
            self.s = np.asarray(self.s, dtype=np.float64).reshape(-1, 3)
            self.sigma = np.asarray(self.sigma, dtype=np.float64).reshape(-1)
            self.c = np.asarray(self.c, dtype=np.float64).reshape(-1, 3)
        n = len(self.g)
        if not (len(self.r) == len(self.s) == len(self.sigma) == len(self.c) == n):
            raise ValueError("splat field lengths disagree")

    @classmethod
    def empty(cls, frame_id: int = 0) -> "SplatScene":
        return cls(np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)),
                   np.zeros(0), np.zeros((0, 3)), frame_id)

    @classmethod
    def from_splats(cls, splats, frame_id: int = 0) -> "SplatScene":
        splats = list(splats)
        if not splats:
            return cls.empty(frame_id)
        return cls(np.stack([p.g for p in splats]), np.stack([p.r for p in splats]),
                   np.stack([p.s for p in splats]), np.array([p.sigma for p in splats]),
                   np.stack([p.c for p in splats]), frame_id)

    def __len__(self) -> int:
        return len(self.g)

    def __getitem__(self, i: int) -> Splat:
        n = self.numpy()
        return Splat(n.g[i], n.r[i], n.s[i], n.sigma[i], n.c[i])

    def __iter__(self):
        n = self.numpy()
        for i in range(len(n)):
            yield Splat(n.g[i], n.r[i], n.s[i], n.sigma[i], n.c[i])

    @property
    def splats(self) -> list[Splat]:
        return list(self)

    @property
    def is_tensor(self) -> bool:
        return isinstance(self.g, torch.Tensor)

    def numpy(self) -> "SplatScene":
        if not self.is_tensor:
            return self
        return SplatScene(as_numpy(self.g), as_numpy(self.r), as_numpy(self.s),
                          as_numpy(self.sigma), as_numpy(self.c), self.frame_id)

    def tensors(self) -> "SplatScene":
        return SplatScene(as_tensor(self.g), as_tensor(self.r), as_tensor(self.s),
                          as_tensor(self.sigma), as_tensor(self.c), self.frame_id)

    def subset(self, idx) -> "SplatScene":
        idx = np.asarray(idx, dtype=np.int64)
        if self.is_tensor:
            idx = torch.as_tensor(idx)
        return SplatScene(self.g[idx], self.r[idx], self.s[idx], self.sigma[idx],
                          self.c[idx], self.frame_id)

    def replace(self, **kw) -> "SplatScene":
        return replace(self, **kw)

    def copy(self) -> "SplatScene":
        n = self.numpy()
        return SplatScene(n.g.copy(), n.r.copy(), n.s.copy(), n.sigma.copy(),
                          n.c.copy(), self.frame_id)


@dataclass
class CameraView:
    """Pinhole camera. ``pose`` maps world points to the camera frame
    (x right, y down, z forward); pixel (u, v) has its center at (u, v)."""

    pose: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 1e-3

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=np.float64).reshape(4, 4)
        rot = self.pose[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6):
            raise ValueError("camera rotation is not orthonormal")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        self.width = int(self.width)
        self.height = int(self.height)

    @property
    def rotation(self) -> np.ndarray:
        return self.pose[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.pose[:3, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=np.float64) @ self.rotation.T + self.translation

    def project(self, pts: np.ndarray) -> np.ndarray:
        """Pixel coordinates (..., 2) of world points (..., 3)."""
        pc = self.to_camera(pts)
        return np.stack([self.fx * pc[..., 0] / pc[..., 2] + self.cx,
                         self.fy * pc[..., 1] / pc[..., 2] + self.cy], -1)

    @classmethod
    def look_at(cls, eye, target, fx, fy, width, height, up=(0.0, 0.0, 1.0),
                cx=None, cy=None) -> "CameraView":
        eye = np.asarray(eye, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - eye
        fwd /= np.linalg.norm(fwd)
        up = np.asarray(up, dtype=np.float64)
        if abs(fwd @ up) > 1 - 1e-9:
            up = np.array([0.0, 1.0, 0.0])
        right = np.cross(fwd, up)
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        rot = np.stack([right, down, fwd])
        pose = np.eye(4)
        pose[:3, :3] = rot
        pose[:3, 3] = -rot @ eye
        cx = (width - 1) / 2 if cx is None else cx
        cy = (height - 1) / 2 if cy is None else cy
        return cls(pose, fx, fy, cx, cy, width, height)


@dataclass
class Image:
    """RGB image in [0, 1] with optional metric depth (0 marks invalid)."""

    rgb: np.ndarray
    depth: np.ndarray | None = None
    width: int = field(default=-1)
    height: int = field(default=-1)

    def __post_init__(self):
        if not isinstance(self.rgb, torch.Tensor):
            self.rgb = np.asarray(self.rgb, dtype=np.float64)
        h, w = self.rgb.shape[:2]
        if self.width < 0:
            self.width = w
        if self.height < 0:
            self.height = h
        if (self.height, self.width) != (h, w) or self.rgb.shape[2:] != (3,):
            raise ValueError("image dimensions do not match declared size")
        if self.depth is not None:
            self.depth = np.asarray(self.depth, dtype=np.float64)
            if self.depth.shape != (h, w):
                raise ValueError("depth map dimensions do not match")
