"""Radius graphs over splats."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import EmptyScene
from ..splat_core import SplatScene, as_numpy

OMEGA = 0.1
N_FEATURES = 14


@dataclass
class SceneGraph:
    """Node features (N, 14) in the order (c, sigma, r, g, s), undirected edges
    as (E, 2) index pairs with i < j, and the node -> splat index map."""

    nodes: torch.Tensor
    edges: np.ndarray
    splat_index: np.ndarray

    def __len__(self) -> int:
        return len(self.splat_index)

    @property
    def directed(self) -> tuple[np.ndarray, np.ndarray]:
        """(src, dst) arrays listing each undirected edge in both directions."""
        if len(self.edges) == 0:
            e = np.zeros(0, dtype=np.int64)
            return e, e
        i, j = self.edges[:, 0], self.edges[:, 1]
        return np.concatenate([i, j]), np.concatenate([j, i])


def node_features(scene: SplatScene) -> torch.Tensor:
    """(..., N, 14) features; differentiable when the scene holds tensors."""
    sc = scene.tensors()
    return torch.cat([sc.c, sc.sigma[..., None], sc.r, sc.g, sc.s], -1)


def radius_edges(positions, omega: float = OMEGA) -> np.ndarray:
    """All pairs i < j with Euclidean distance <= omega."""
    g = as_numpy(positions)
    if len(g) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    d = np.linalg.norm(g[:, None] - g[None], axis=-1)
    i, j = np.nonzero(np.triu(d <= omega, 1))
    return np.stack([i, j], -1).astype(np.int64)


def build_graph(scene: SplatScene, omega: float = OMEGA) -> SceneGraph:
    if len(scene) == 0:
        raise EmptyScene("cannot build a graph over an empty scene")
    g = as_numpy(scene.g)
    return SceneGraph(node_features(scene), radius_edges(g, omega), np.arange(len(g)))


def permute_graph(graph: SceneGraph, perm) -> SceneGraph:
    """Relabel nodes so that new node k is old node perm[k]."""
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    e = inv[graph.edges] if len(graph.edges) else graph.edges
    if len(e):
        e = np.sort(e, axis=1)
    return SceneGraph(graph.nodes[..., torch.as_tensor(perm), :], e, graph.splat_index[perm])
