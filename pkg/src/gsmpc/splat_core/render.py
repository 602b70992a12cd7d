"""Covariance construction, screen-space projection and splat rasterization.

The rasterizer is sparse: each splat only touches pixels inside its 3-sigma
screen-space ellipse, so cost scales with covered area rather than
``n_splats * n_pixels``. Pixel coverage is decided outside the autograd
graph; colors, opacities and transmittance are computed with torch so that
gradients reach every splat parameter.
"""
from __future__ import annotations

import numpy as np
import torch

from ..errors import BehindCamera
from .types import DTYPE, CameraView, Image, Splat, SplatScene, as_numpy, as_tensor, quat_to_rotmat

COV_FLOOR = 1e-6
CUTOFF = 3.0


def covariances(r, s) -> torch.Tensor:
    """Batched R diag(s^2) R^T for quaternions (N,4) and scales (N,3)."""
    rot = quat_to_rotmat(r)
    s = as_tensor(s)
    return (rot * (s * s)[..., None, :]) @ rot.transpose(-1, -2)


def build_covariance(splat: Splat) -> np.ndarray:
    return as_numpy(covariances(splat.r[None], splat.s[None])[0])


def _projection_jacobian(pc: torch.Tensor, fx, fy) -> torch.Tensor:
    x, y, z = pc.unbind(-1)
    zero = torch.zeros_like(z)
    return torch.stack([
        torch.stack([fx / z, zero, -fx * x / (z * z)], -1),
        torch.stack([zero, fy / z, -fy * y / (z * z)], -1),
    ], -2)


def _screen_covariance(cov3: torch.Tensor, pc: torch.Tensor, view: CameraView) -> torch.Tensor:
    jw = _projection_jacobian(pc, view.fx, view.fy) @ as_tensor(view.rotation)
    cov2 = jw @ cov3 @ jw.transpose(-1, -2)
    return cov2 + COV_FLOOR * torch.eye(2, dtype=DTYPE)


def project_covariance(sigma3d, splat_pos, view: CameraView):
    """Screen-space 2x2 covariance J W Sigma W^T J^T (plus a small floor).

    Raises BehindCamera when the splat is not in front of the near plane.
    """
    pc = as_tensor(view.to_camera(as_numpy(splat_pos)))
    if float(pc[2]) <= view.near:
        raise BehindCamera(f"camera-frame depth {float(pc[2]):.4g} is behind the near plane")
    out = _screen_covariance(as_tensor(sigma3d), pc, view)
    return out if isinstance(sigma3d, torch.Tensor) else as_numpy(out)


def _coverage(mean: np.ndarray, cov2: np.ndarray, width: int, height: int, cutoff: float):
    """Enumerate (splat, u, v) triples within the Mahalanobis cutoff."""
    ru = cutoff * np.sqrt(cov2[:, 0, 0])
    rv = cutoff * np.sqrt(cov2[:, 1, 1])
    u0 = np.clip(np.ceil(mean[:, 0] - ru), 0, width).astype(np.int64)
    u1 = np.clip(np.floor(mean[:, 0] + ru), -1, width - 1).astype(np.int64)
    v0 = np.clip(np.ceil(mean[:, 1] - rv), 0, height).astype(np.int64)
    v1 = np.clip(np.floor(mean[:, 1] + rv), -1, height - 1).astype(np.int64)
    nu = np.maximum(u1 - u0 + 1, 0)
    nv = np.maximum(v1 - v0 + 1, 0)
    counts = nu * nv
    total = int(counts.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    rep = np.repeat(np.arange(len(mean)), counts)
    off = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    u = u0[rep] + off % nu[rep]
    v = v0[rep] + off // nu[rep]

    det = cov2[:, 0, 0] * cov2[:, 1, 1] - cov2[:, 0, 1] ** 2
    dx = u - mean[rep, 0]
    dy = v - mean[rep, 1]
    m = (cov2[rep, 1, 1] * dx * dx - 2 * cov2[rep, 0, 1] * dx * dy
         + cov2[rep, 0, 0] * dy * dy) / det[rep]
    keep = m <= cutoff * cutoff
    return rep[keep], u[keep], v[keep]


def render_tensor(scene: SplatScene, view: CameraView, background=(0.0, 0.0, 0.0),
                  cutoff: float = CUTOFF) -> torch.Tensor:
    """Differentiable render returning an (H, W, 3) float64 tensor."""
    return render_views_tensor(scene, [view], background, cutoff)[0]


def render_views_tensor(scene: SplatScene, views: list[CameraView], background=(0.0, 0.0, 0.0),
                        cutoff: float = CUTOFF) -> torch.Tensor:
    """Render several same-sized views in one pass; returns (V, H, W, 3)."""
    h, w = views[0].height, views[0].width
    if any((v.height, v.width) != (h, w) for v in views):
        return torch.stack([render_tensor(scene, v, background, cutoff) for v in views])
    n_views = len(views)
    bg = as_tensor(background).reshape(3)
    img = bg.expand(n_views * h * w, 3)
    blank = img.reshape(n_views, h, w, 3).clone
    if len(scene) == 0:
        return blank()

    sc = scene.tensors()
    rot = as_tensor(np.stack([v.rotation for v in views]))
    trans = as_tensor(np.stack([v.translation for v in views]))
    pc_all = torch.einsum("vij,nj->vni", rot, sc.g) + trans[:, None]
    near = np.array([v.near for v in views])[:, None]
    vi, ni = np.nonzero(as_numpy(pc_all[..., 2]) > near)
    if len(vi) == 0:
        return blank()
    vi_t, ni_t = torch.as_tensor(vi), torch.as_tensor(ni)
    fx = as_tensor(np.array([v.fx for v in views]))[vi_t]
    fy = as_tensor(np.array([v.fy for v in views]))[vi_t]
    cx = as_tensor(np.array([v.cx for v in views]))[vi_t]
    cy = as_tensor(np.array([v.cy for v in views]))[vi_t]

    pc = pc_all[vi_t, ni_t]
    x, y, z = pc.unbind(-1)
    jw = _projection_jacobian(pc, fx, fy) @ rot[vi_t]
    cov3 = covariances(sc.r, sc.s)[ni_t]
    cov2 = jw @ cov3 @ jw.transpose(-1, -2) + COV_FLOOR * torch.eye(2, dtype=DTYPE)
    mean = torch.stack([fx * x / z + cx, fy * y / z + cy], -1)

    rep, u, v = _coverage(as_numpy(mean), as_numpy(cov2), w, h, cutoff)
    if len(rep) == 0:
        return blank()

    # Composite front to back per pixel; equal depths fall back to splat index.
    pid = vi[rep] * (h * w) + v * w + u
    order = np.lexsort((ni[rep], as_numpy(z)[rep], pid))
    rep, u, v, pid = rep[order], u[order], v[order], pid[order]
    uniq, start, counts = np.unique(pid, return_index=True, return_counts=True)
    group = np.repeat(np.arange(len(uniq)), counts)
    slot = np.arange(len(pid)) - np.repeat(start, counts)

    rep_t = torch.as_tensor(rep)
    c2 = cov2[rep_t]
    det = c2[:, 0, 0] * c2[:, 1, 1] - c2[:, 0, 1] ** 2
    dx = torch.as_tensor(u, dtype=DTYPE) - mean[rep_t, 0]
    dy = torch.as_tensor(v, dtype=DTYPE) - mean[rep_t, 1]
    maha = (c2[:, 1, 1] * dx * dx - 2 * c2[:, 0, 1] * dx * dy + c2[:, 0, 0] * dy * dy) / det
    splat_t = ni_t[rep_t]
    alpha = sc.sigma[splat_t] * torch.exp(-0.5 * maha)

    g_t, s_t = torch.as_tensor(group), torch.as_tensor(slot)
    n_groups, depth = len(uniq), int(counts.max())
    a = torch.zeros(n_groups, depth, dtype=DTYPE).index_put((g_t, s_t), alpha)
    col = torch.zeros(n_groups, depth, 3, dtype=DTYPE).index_put((g_t, s_t), sc.c[splat_t])
    trans_acc = torch.cumprod(1 - a, dim=1)
    before = torch.cat([torch.ones(n_groups, 1, dtype=DTYPE), trans_acc[:, :-1]], 1)
    shaded = ((a * before)[..., None] * col).sum(1) + trans_acc[:, -1:] * bg
    img = img.index_put((torch.as_tensor(uniq),), shaded)
    return img.reshape(n_views, h, w, 3)


def render(scene: SplatScene, view: CameraView, background=(0.0, 0.0, 0.0)) -> Image:
    with torch.no_grad():
        rgb = render_tensor(scene, view, background)
    return Image(as_numpy(rgb))
