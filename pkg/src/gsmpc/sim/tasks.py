"""Task definitions, success test, state error and the demonstration policy."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import AlreadySolved, EmptySet
from .physics import Action, ActionLimits, ParticleState, SimConfig


class TaskKind(str, enum.Enum):
    COLLECTING = "collecting"
    SPLITTING = "splitting"
    REDISTRIBUTING = "redistributing"


@dataclass
class Region:
    """A target disk; for redistributing tasks also a square grid cell with a
    desired particle count."""

    center: np.ndarray
    radius: float
    count: int = 0

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(2)


@dataclass
class TaskSpec:
    kind: TaskKind
    target_regions: list[Region]
    tolerance: float = 0.005
    count_tolerance: float = 0.25

    def __post_init__(self):
        self.kind = TaskKind(self.kind)
        if self.kind == TaskKind.SPLITTING and len(self.target_regions) < 2:
            raise ValueError("splitting needs at least two target regions")


def _cell_members(xy: np.ndarray, region: Region) -> np.ndarray:
    return np.all(np.abs(xy - region.center) <= region.radius, axis=-1)


def success(state: ParticleState, task: TaskSpec) -> bool:
    xy = state.xy
    if task.kind == TaskKind.REDISTRIBUTING:
        for reg in task.target_regions:
            if reg.count > 0:
                have = int(_cell_members(xy, reg).sum())
                if abs(have - reg.count) > task.count_tolerance * reg.count:
                    return False
        return True
    if len(xy) == 0:
        return True
    return bool(np.all(_outside_distance(xy, task) <= task.tolerance))


def _outside_distance(xy: np.ndarray, task: TaskSpec) -> np.ndarray:
    """Distance of each particle center to its nearest target disk (0 inside)."""
    centers = np.stack([r.center for r in task.target_regions])
    radii = np.array([r.radius for r in task.target_regions])
    d = np.linalg.norm(xy[:, None] - centers[None], axis=-1) - radii
    return np.maximum(d.min(1), 0.0)


def state_error(state: ParticleState, target: ParticleState) -> float:
    """Symmetric Chamfer distance with squared Euclidean terms."""
    a, b = state.positions, target.positions
    if len(a) == 0 or len(b) == 0:
        raise EmptySet("state_error needs two non-empty particle sets")
    d2 = ((a[:, None] - b[None]) ** 2).sum(-1)
    return float(d2.min(1).mean() + d2.min(0).mean())


def hex_pile(n: int, center, radius: float, gap: float = 5e-4) -> np.ndarray:
    """The ``n`` hexagonal-lattice sites nearest ``center``: a compact pile."""
    if n == 0:
        return np.zeros((0, 2))
    step = 2 * radius + gap
    m = int(np.ceil(np.sqrt(n))) + 3
    sites = [(step * (i + 0.5 * (j % 2)), step * j * np.sqrt(3) / 2)
             for i in range(-m, m + 1) for j in range(-m, m + 1)]
    sites = np.array(sites)
    order = np.lexsort((sites[:, 1], sites[:, 0], np.round(np.linalg.norm(sites, axis=1), 9)))
    return sites[order[:n]] + np.asarray(center)


def target_state(task: TaskSpec, n: int, config: SimConfig) -> ParticleState:
    """A canonical solved configuration: compact piles in the target regions."""
    regions = task.target_regions
    if task.kind == TaskKind.REDISTRIBUTING:
        counts = np.array([r.count for r in regions])
    else:
        counts = np.full(len(regions), n // len(regions))
        counts[: n - counts.sum()] += 1
    xy = np.concatenate([hex_pile(int(k), reg.center, config.radius) for k, reg in zip(counts, regions)])
    return ParticleState(np.column_stack([xy, np.full(len(xy), config.radius)]), config.radius,
                         config.workspace)


def random_task(kind, config: SimConfig, rng: np.random.Generator, n_particles: int | None = None,
                radius: float | None = None) -> TaskSpec:
    kind = TaskKind(kind)
    h = config.half_extent
    n = config.n_particles if n_particles is None else n_particles
    if kind == TaskKind.COLLECTING:
        rad = radius if radius is not None else rng.uniform(0.04, 0.07)
        c = rng.uniform(-(h - rad), h - rad, 2)
        return TaskSpec(kind, [Region(c, rad)])
    if kind == TaskKind.SPLITTING:
        rad = radius if radius is not None else 0.04
        lim = h - rad
        ang = rng.uniform(0, np.pi)
        off = 0.6 * lim * np.array([np.cos(ang), np.sin(ang)])
        return TaskSpec(kind, [Region(off, rad), Region(-off, rad)])
    cell = 0.04
    centers = rng.choice([-0.06, 0.0, 0.06], size=(3, 2))
    centers = np.unique(centers, axis=0)
    counts = np.full(len(centers), n // len(centers))
    counts[: n - counts.sum()] += 1
    return TaskSpec(kind, [Region(c, cell / 2, int(k)) for c, k in zip(centers, counts)])


def _redistribution_targets(xy: np.ndarray, task: TaskSpec):
    """Deficit cells as pseudo-disks, plus the particles free to move."""
    members = np.stack([_cell_members(xy, r) for r in task.target_regions])
    have = members.sum(1)
    want = np.array([r.count for r in task.target_regions])
    deficit = [r for r, h, w in zip(task.target_regions, have, want) if h < w]
    surplus = (have > want)
    movable = ~members.any(0) | members[surplus].any(0)
    return deficit, movable


def oracle_policy(state: ParticleState, task: TaskSpec, rng: np.random.Generator,
                  limits: ActionLimits | None = None, angle_noise: float = np.deg2rad(3.0),
                  pos_noise: float = 0.002) -> Action:
    """Push the particle farthest from its nearest target region toward it."""
    if success(state, task):
        raise AlreadySolved("task success criterion already met")
    limits = limits or ActionLimits(state.workspace)
    xy, r = state.xy, state.radius
    if task.kind == TaskKind.REDISTRIBUTING:
        regions, movable = _redistribution_targets(xy, task)
        if not regions or not movable.any():
            regions, movable = task.target_regions, np.ones(len(xy), dtype=bool)
        sub = TaskSpec(TaskKind.COLLECTING, [Region(g.center, g.radius) for g in regions])
        dist = np.where(movable, _outside_distance(xy, sub), -1.0)
        dist = np.where(movable & (dist == 0), 1e-9, dist)
    else:
        sub = task
        dist = _outside_distance(xy, task)
    i = int(np.argmax(dist))
    centers = np.stack([g.center for g in sub.target_regions])
    goal = centers[np.argmin(np.linalg.norm(centers - xy[i], axis=1))]

    to_goal = goal - xy[i]
    ang = np.arctan2(to_goal[1], to_goal[0]) + rng.normal(0, angle_noise)
    dirn = np.array([np.cos(ang), np.sin(ang)])
    start = xy[i] - dirn * (r + 0.01) + rng.normal(0, pos_noise, 2)
    travel = float(np.linalg.norm(to_goal)) + 0.01
    end = start + dirn * travel
    return Action.from_vector(limits.project(np.concatenate([start, end])))
