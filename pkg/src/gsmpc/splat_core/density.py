"""Opacity-weighted Gaussian density field over a splat scene."""
from __future__ import annotations

import numpy as np
import torch

from .types import SplatScene, as_tensor, quat_to_rotmat


MAHA_MAX = 1400.0


def density_field(scene: SplatScene, points) -> torch.Tensor:
    """Density at each of ``points`` (P, 3).

    Scene fields may carry leading batch dimensions, e.g. ``g`` of shape
    (K, N, 3); the result then has shape (K, P).
    """
    pts = as_tensor(points).reshape(-1, 3)
    g, s = as_tensor(scene.g), as_tensor(scene.s)
    sigma = as_tensor(scene.sigma)
    if g.shape[-2] == 0:
        return torch.zeros(g.shape[:-2] + (len(pts),), dtype=pts.dtype)
    rot = quat_to_rotmat(scene.r)
    prec = (rot / (s * s)[..., None, :]) @ rot.transpose(-1, -2)   # R diag(1/s^2) R^T
    # Expand (x - g)^T A (x - g) so the point loop becomes two matmuls.
    ag = (prec @ g[..., :, None])[..., 0]                             # (..., N, 3)
    outer = (pts[:, :, None] * pts[:, None, :]).reshape(-1, 9)        # (P, 9)
    maha = prec.flatten(-2) @ outer.T - 2 * ag @ pts.T + (g * ag).sum(-1)[..., None]
    # Low clamp absorbs rounding near the center. The high clamp keeps exp out
    # of its slow underflow path; beyond it the density is below 1e-300 and set to 0.
    near = maha < MAHA_MAX
    weight = torch.exp(-0.5 * maha.clamp(0, MAHA_MAX)) * near
    return (sigma[..., :, None] * weight).sum(-2)


def density(scene: SplatScene, x) -> float:
    with torch.no_grad():
        return float(density_field(scene, np.asarray(x, dtype=np.float64)[None])[..., 0])
