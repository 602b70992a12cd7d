"""Quasi-static planar pushing of disk-footprint particles.

A zero-thickness segment pusher sweeps from the action's start to its end in
substeps. Particles inside the swept band are carried on the pusher face,
the segment tips push particles out radially, and particle overlaps are
removed by repeated pairwise projection. There is no inertia or friction:
particles move only while something is pushing them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidAction
from ..geometry import Box, table_box

CONTACT_TOL = 1e-5


@dataclass
class SimConfig:
    n_particles: int = 50
    radius: float = 0.005
    pusher_len: float = 0.10
    half_extent: float = 0.12
    min_push: float = 0.02
    max_push: float = 0.20
    substeps: int = 20
    resolver_iters: int = 10
    particle_color: tuple = (0.85, 0.55, 0.20)
    background_color: tuple = (0.25, 0.35, 0.45)

    @property
    def workspace(self) -> Box:
        return Box((-self.half_extent, -self.half_extent, 0.0),
                   (self.half_extent, self.half_extent, 4 * self.radius))

    @property
    def perception_box(self) -> Box:
        """The workspace with the table surface cut away, for cropping lifted
        points and filtering fitted splats."""
        return table_box(self.half_extent, 4 * self.radius, floor=0.2 * self.radius)


@dataclass
class ParticleState:
    positions: np.ndarray
    radius: float
    workspace: Box

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def xy(self) -> np.ndarray:
        return self.positions[:, :2]

    def with_xy(self, xy: np.ndarray) -> "ParticleState":
        pos = np.column_stack([xy, np.full(len(xy), self.radius)])
        return ParticleState(pos, self.radius, self.workspace)


@dataclass
class Action:
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64).reshape(2)
        self.end = np.asarray(self.end, dtype=np.float64).reshape(2)

    @classmethod
    def from_vector(cls, u) -> "Action":
        u = np.asarray(u, dtype=np.float64).reshape(4)
        return cls(u[:2], u[2:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.start, self.end])

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))


@dataclass
class ActionLimits:
    workspace: Box
    min_push: float = 0.02
    max_push: float = 0.20
    tol: float = 1e-9

    def is_valid(self, action: Action) -> bool:
        inside = self.workspace.contains_xy(np.stack([action.start, action.end]), self.tol).all()
        return bool(inside and self.min_push - self.tol <= action.length <= self.max_push + self.tol)

    def check(self, action: Action):
        if not self.is_valid(action):
            raise InvalidAction(
                f"push {action.as_vector().round(4).tolist()} violates workspace or "
                f"length limits [{self.min_push}, {self.max_push}]")

    def project(self, u: np.ndarray) -> np.ndarray:
        """Clamp (..., 4) action vectors into validity.

        Endpoints are clamped to the workspace, then the end point is moved
        along the push direction to bring the length into range. If that
        leaves the workspace, the start point is moved instead.
        """
        u = np.array(u, dtype=np.float64, copy=True)
        lo, hi = np.asarray(self.workspace.lo[:2]), np.asarray(self.workspace.hi[:2])
        flat = u.reshape(-1, 4)
        for row in flat:
            s = np.clip(row[:2], lo, hi)
            e = np.clip(row[2:], lo, hi)
            d = e - s
            n = np.linalg.norm(d)
            dirn = d / n if n > 1e-12 else np.array([1.0, 0.0])
            length = np.clip(n, self.min_push, self.max_push)
            e2 = s + dirn * length
            if not (np.all(e2 >= lo - self.tol) and np.all(e2 <= hi + self.tol)):
                e2 = np.clip(e2, lo, hi)
                s = e2 - dirn * length
                if not (np.all(s >= lo - self.tol) and np.all(s <= hi + self.tol)):
                    # Direction cannot fit at this length; aim at the workspace center.
                    center = (lo + hi) / 2
                    dirn = center - s
                    dirn = dirn / max(np.linalg.norm(dirn), 1e-12)
                    s = np.clip(s, lo, hi)
                    e2 = s + dirn * length
            row[:2], row[2:] = s, np.clip(e2, lo, hi)
        return flat.reshape(u.shape)


def _resolve_pairs(p: np.ndarray, radius: float) -> float:
    """One Jacobi sweep of pairwise overlap projection in place; returns the
    largest overlap found before the sweep."""
    n = len(p)
    if n < 2:
        return 0.0
    diff = p[:, None, :] - p[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, np.inf)
    overlap = 2 * radius - dist
    worst = float(overlap.max())
    if worst <= 0:
        return worst
    i, j = np.nonzero(np.triu(overlap > 0, 1))
    d = dist[i, j]
    dirs = np.where(d[:, None] > 1e-12, diff[i, j] / np.maximum(d, 1e-12)[:, None],
                    np.stack([np.cos(i + 0.5 * j), np.sin(i + 0.5 * j)], -1))
    shift = 0.5 * overlap[i, j][:, None] * dirs
    disp = np.zeros_like(p)
    np.add.at(disp, i, shift)
    np.add.at(disp, j, -shift)
    p += disp
    return worst


def _apply_pusher(p: np.ndarray, origin, normal, tangent, s_lo, s_hi, half, radius):
    rel = p - origin
    a = rel @ normal
    b = rel @ tangent
    band = (a >= s_lo - radius) & (a < s_hi + radius)
    face = band & (np.abs(b) <= half)
    p[face] += (s_hi + radius - a[face])[:, None] * normal
    # Segment tips: project out to distance `radius` from the end point.
    for sign in (1.0, -1.0):
        tip = origin + s_hi * normal + sign * half * tangent
        off = p - tip
        dist = np.linalg.norm(off, axis=1)
        hit = band & ~face & (dist < radius) & (sign * b > half)
        if hit.any():
            p[hit] = tip + off[hit] / np.maximum(dist[hit], 1e-12)[:, None] * radius


def _clamp(p: np.ndarray, workspace: Box, radius: float):
    lo = np.asarray(workspace.lo[:2]) + radius
    hi = np.asarray(workspace.hi[:2]) - radius
    np.clip(p, lo, hi, out=p)


def relax(p: np.ndarray, workspace: Box, radius: float, max_iters: int = 2000) -> np.ndarray:
    """Remove residual overlaps (no pusher present) until within tolerance."""
    for _ in range(max_iters):
        worst = _resolve_pairs(p, radius)
        _clamp(p, workspace, radius)
        if worst <= CONTACT_TOL * 0.1:
            break
    return p


def step(state: ParticleState, action: Action, pusher_len: float = 0.10,
         limits: ActionLimits | None = None, substeps: int = 20,
         resolver_iters: int = 10) -> ParticleState:
    """Sweep the pusher along ``action`` and return the settled state."""
    limits = limits or ActionLimits(state.workspace)
    limits.check(action)
    r = state.radius
    p = state.xy.copy()
    if len(p) == 0:
        return state.with_xy(p)
    d = action.end - action.start
    length = float(np.linalg.norm(d))
    normal = d / length
    tangent = np.array([-normal[1], normal[0]])
    half = pusher_len / 2

    # Untouched particles must stay bit-identical, so only touch what moves.
    s_prev = 0.0
    for k in range(1, substeps + 1):
        s_cur = length * k / substeps
        before = p.copy()
        _apply_pusher(p, action.start, normal, tangent, s_prev, s_cur, half, r)
        if np.array_equal(before, p) and _resolve_pairs(p.copy(), r) <= 0:
            s_prev = s_cur
            continue
        for _ in range(resolver_iters):
            _resolve_pairs(p, r)
            _apply_pusher(p, action.start, normal, tangent, s_cur, s_cur, half, r)
            _clamp(p, state.workspace, r)
        s_prev = s_cur
    relax(p, state.workspace, r)
    return state.with_xy(p)


def scatter(n: int, config: SimConfig, rng: np.random.Generator, margin: float = 0.0,
            center=None, spread: float | None = None) -> ParticleState:
    """Non-overlapping uniform placement inside the workspace (or a disk)."""
    r = config.radius
    lim = config.half_extent - r - margin
    pts: list[np.ndarray] = []
    attempts = 0
    while len(pts) < n:
        attempts += 1
        if attempts > 100000:
            raise RuntimeError("could not place particles without overlap")
        if spread is None:
            q = rng.uniform(-lim, lim, 2)
        else:
            ang = rng.uniform(0, 2 * np.pi)
            q = np.asarray(center) + np.sqrt(rng.uniform()) * spread * np.array([np.cos(ang), np.sin(ang)])
            if np.any(np.abs(q) > lim):
                continue
        if all(np.linalg.norm(q - o) >= 2 * r + 1e-4 for o in pts):
            pts.append(q)
    xy = np.array(pts).reshape(-1, 2)
    return ParticleState(np.column_stack([xy, np.full(n, r)]), r, config.workspace)
