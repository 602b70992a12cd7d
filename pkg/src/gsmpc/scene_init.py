"""From multi-view RGBD to an initial splat set, and the full perception step.

``perceive`` chains lift -> crop -> farthest point sampling -> splat init ->
photometric fit -> filtering, turning one set of observations into the
filtered splat scene used by the dynamics model and planner.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloud, NoObservations
from .geometry import Box
from .splat_core import CameraView, FitConfig, Image, SplatScene, fit_scene


@dataclass
class RGBDObservation:
    image: Image
    view: CameraView


@dataclass
class PointCloud:
    points: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if len(self.points) != len(self.colors):
            raise ValueError("points and colors differ in length")

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, idx) -> "PointCloud":
        return PointCloud(self.points[idx], self.colors[idx])


def lift(obs: list[RGBDObservation]) -> PointCloud:
    """Back-project every valid-depth pixel into world coordinates."""
    if not obs:
        raise NoObservations("lift needs at least one observation")
    pts, cols = [], []
    for o in obs:
        cam, depth = o.view, o.image.depth
        v, u = np.nonzero(depth > 0)
        z = depth[v, u]
        pc = np.stack([(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z], -1)
        pts.append((pc - cam.translation) @ cam.rotation)
        cols.append(np.asarray(o.image.rgb)[v, u])
    return PointCloud(np.concatenate(pts), np.concatenate(cols))


def crop_cloud(cloud: PointCloud, box: Box) -> PointCloud:
    return cloud.subset(np.nonzero(box.contains(cloud.points))[0])


def farthest_point_sample(cloud: PointCloud, k: int, seed: int = 0,
                          first: int | None = None) -> PointCloud:
    """Greedy max-min subset of ``k`` points; the first pick is seeded-random
    unless ``first`` is given."""
    if k < 1:
        raise ValueError("k must be at least 1")
    n = len(cloud)
    if n == 0:
        raise EmptyCloud("cannot sample from an empty cloud")
    if n <= k:
        return cloud
    pts = cloud.points
    idx = np.empty(k, dtype=np.int64)
    idx[0] = np.random.default_rng(seed).integers(n) if first is None else first
    dist = np.linalg.norm(pts - pts[idx[0]], axis=1)
    for i in range(1, k):
        idx[i] = int(np.argmax(dist))
        dist = np.minimum(dist, np.linalg.norm(pts - pts[idx[i]], axis=1))
    return cloud.subset(idx)


def init_splats(cloud: PointCloud, default_scale: float, default_sigma: float = 0.9,
                frame_id: int = 0) -> SplatScene:
    n = len(cloud)
    if n == 0:
        raise EmptyCloud("cannot initialize splats from an empty cloud")
    r = np.zeros((n, 4))
    r[:, 0] = 1.0
    return SplatScene(cloud.points.copy(), r, np.full((n, 3), float(default_scale)),
                      np.full(n, float(default_sigma)), cloud.colors.copy(), frame_id)


def filter_scene(scene: SplatScene, workspace: Box, sigma_min: float = 0.05) -> SplatScene:
    """Keep splats inside the closed workspace box with opacity >= sigma_min."""
    scene = scene.numpy()
    keep = workspace.contains(scene.g) & (scene.sigma >= sigma_min)
    return scene.subset(np.nonzero(keep)[0])


@dataclass
class PerceptionConfig:
    n_splats: int = 20
    default_scale: float = 0.0025
    default_sigma: float = 0.9
    sigma_min: float = 0.05
    fit: FitConfig = None
    seed: int = 0

    def __post_init__(self):
        if self.fit is None:
            self.fit = FitConfig()


def perceive(obs: list[RGBDObservation], workspace: Box, config: PerceptionConfig,
             frame_id: int = 0, history: list | None = None) -> SplatScene:
    """Splat scene for one multi-view observation set.

    Returns an empty scene when no valid point falls inside the workspace.
    """
    cloud = crop_cloud(lift(obs), workspace)
    if len(cloud) == 0:
        return SplatScene.empty(frame_id)
    cloud = farthest_point_sample(cloud, config.n_splats, config.seed)
    init = init_splats(cloud, config.default_scale, config.default_sigma, frame_id)
    views = [(o.image, o.view) for o in obs]
    fitted = fit_scene(views, init, config.fit, history)
    return filter_scene(fitted, workspace, config.sigma_min)
