"""Independent reference implementations used to cross-check the package.

These are written directly from the defining formulas with plain loops and
share no code with the library beyond its data containers.
"""
from __future__ import annotations

import numpy as np


def rotmat(q):
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def dense_render(g, r, s, sigma, c, pose, fx, fy, cx, cy, width, height, background,
                 cutoff=3.0, floor=1e-6):
    """Per-pixel, per-splat front-to-back compositing."""
    rot, t = pose[:3, :3], pose[:3, 3]
    out = np.zeros((height, width, 3))
    bg = np.asarray(background, dtype=np.float64)
    pcs = [rot @ gi + t for gi in g]
    order = sorted(range(len(g)), key=lambda i: (pcs[i][2], i))
    order = [i for i in order if pcs[i][2] > 1e-3]
    means, icovs = {}, {}
    for i in order:
        x, y, z = pcs[i]
        jac = np.array([[fx / z, 0, -fx * x / z ** 2], [0, fy / z, -fy * y / z ** 2]])
        rm = rotmat(r[i])
        cov3 = rm @ np.diag(np.asarray(s[i]) ** 2) @ rm.T
        cov2 = jac @ rot @ cov3 @ rot.T @ jac.T + floor * np.eye(2)
        means[i] = np.array([fx * x / z + cx, fy * y / z + cy])
        icovs[i] = np.linalg.inv(cov2)
    for v in range(height):
        for u in range(width):
            trans, col = 1.0, np.zeros(3)
            for i in order:
                d = np.array([u, v]) - means[i]
                m = d @ icovs[i] @ d
                a = sigma[i] * np.exp(-0.5 * m) if m <= cutoff ** 2 else 0.0
                col += trans * a * np.asarray(c[i])
                trans *= 1 - a
            out[v, u] = col + trans * bg
    return out


def ssim_constant(mx, my, c1=0.01 ** 2):
    """SSIM of two constant images (zero variance, zero covariance)."""
    return (2 * mx * my + c1) / (mx * mx + my * my + c1)


def central_difference(f, x: np.ndarray, h: float) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def rel_error(a, b) -> float:
    """Norm-wise relative error of ``a`` against reference ``b``."""
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def chamfer_bruteforce(g1, r1, g2, r2, lam):
    def cost(i, j, ga, ra, gb, rb):
        return np.sqrt(((ga[i] - gb[j]) ** 2).sum()) + lam * (1 - abs(np.dot(ra[i], rb[j])))
    a = np.mean([min(cost(i, j, g1, r1, g2, r2) for j in range(len(g2))) for i in range(len(g1))])
    b = np.mean([min(cost(j, i, g2, r2, g1, r1) for i in range(len(g1))) for j in range(len(g2))])
    return a + b


def density_bruteforce(g, r, s, sigma, x):
    total = 0.0
    for i in range(len(g)):
        rm = rotmat(r[i])
        cov = rm @ np.diag(np.asarray(s[i]) ** 2) @ rm.T
        d = np.asarray(x) - g[i]
        total += sigma[i] * np.exp(-0.5 * d @ np.linalg.solve(cov, d))
    return total
