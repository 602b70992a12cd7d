"""Chamfer objective over splat sets and the training loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from ..errors import EmptyDataset, EmptySet
from ..splat_core import SplatScene
from .graph import SceneGraph, build_graph
from .model import DynamicsModel, apply

log = logging.getLogger(__name__)


def _safe_norm(d: torch.Tensor) -> torch.Tensor:
    sq = (d * d).sum(-1)
    return torch.where(sq > 0, torch.sqrt(sq.clamp_min(1e-300)), torch.zeros_like(sq))


def pair_costs(pred: SplatScene, gt: SplatScene, lam: float) -> tuple[torch.Tensor, torch.Tensor]:
    """(full cost, position-only distance) matrices of shape (n_pred, n_gt)."""
    p, q = pred.tensors(), gt.tensors()
    pos = _safe_norm(p.g[:, None, :] - q.g[None, :, :])
    dot = (p.r[:, None, :] * q.r[None, :, :]).sum(-1).abs()
    return pos + lam * (1 - dot), pos


def chamfer_loss(pred: SplatScene, gt: SplatScene, lam: float = 0.1, match: str = "full") -> torch.Tensor:
    """Symmetric Chamfer distance with per-pair cost |g - g'| + lam (1 - |r.r'|).

    ``match="full"`` picks nearest neighbors by that full cost; ``"position"``
    matches on position alone and evaluates the full cost on the matched pair.
    """
    if len(pred) == 0 or len(gt) == 0:
        raise EmptySet("chamfer_loss needs two non-empty scenes")
    cost, pos = pair_costs(pred, gt, lam)
    if match == "full":
        return cost.min(1).values.mean() + cost.min(0).values.mean()
    if match != "position":
        raise ValueError(f"unknown matching rule {match!r}")
    j = pos.detach().argmin(1)
    i = pos.detach().argmin(0)
    rows = torch.arange(cost.shape[0])
    cols = torch.arange(cost.shape[1])
    return cost[rows, j].mean() + cost[i, cols].mean()


@dataclass
class TrainConfig:
    lr: float = 0.001
    epochs: int = 100
    batch_size: int = 1
    lam: float = 0.1
    seed: int = 0
    omega: float = 0.1
    match: str = "full"


@dataclass
class Transition:
    scene: SplatScene
    action: np.ndarray
    next_scene: SplatScene


def _merge(graphs: list[SceneGraph], actions: list[np.ndarray]):
    """Disjoint union of graphs with per-node copies of each action."""
    nodes, edges, acts, offsets = [], [], [], [0]
    for g, u in zip(graphs, actions):
        nodes.append(g.nodes)
        edges.append(g.edges + offsets[-1])
        acts.append(np.repeat(np.asarray(u, dtype=np.float64)[None], len(g), 0))
        offsets.append(offsets[-1] + len(g))
    merged = SceneGraph(torch.cat(nodes), np.concatenate(edges).reshape(-1, 2),
                        np.arange(offsets[-1]))
    return merged, torch.as_tensor(np.concatenate(acts)), offsets


def batch_loss(model: DynamicsModel, batch: list[Transition], graphs: list[SceneGraph],
               lam: float, match: str = "full") -> torch.Tensor:
    """Per-transition Chamfer losses (B,) for one forward pass over the batch."""
    merged, acts, offsets = _merge(graphs, [t.action for t in batch])
    dg, dr = model(merged, acts, per_node=True)
    losses = []
    for k, t in enumerate(batch):
        sl = slice(offsets[k], offsets[k + 1])
        pred = apply(t.scene.tensors(), (dg[sl], dr[sl]))
        losses.append(chamfer_loss(pred, t.next_scene, lam, match))
    return torch.stack(losses)


def train(model: DynamicsModel, dataset: list[Transition], config: TrainConfig | None = None,
          callback=None):
    """Adam on the Chamfer loss; returns (model, per-epoch mean losses).

    Each epoch visits transitions in a seeded random order, ``batch_size`` at
    a time; a batch's gradient is the mean over its transitions.
    ``callback(epoch, curve)`` runs after every epoch; a true return value
    stops training early.
    """
    config = config or TrainConfig()
    if not dataset:
        raise EmptyDataset("train needs at least one transition")
    dataset = [t if isinstance(t, Transition) else Transition(*t) for t in dataset]
    dataset = [Transition(t.scene.numpy(), np.asarray(t.action.as_vector() if hasattr(t.action, "as_vector")
                                                      else t.action, dtype=np.float64), t.next_scene.numpy())
               for t in dataset]
    graphs = [build_graph(t.scene, config.omega) for t in dataset]
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    rng = np.random.default_rng(config.seed)
    curve = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        total = 0.0
        for b in range(0, len(order), config.batch_size):
            idx = order[b: b + config.batch_size]
            losses = batch_loss(model, [dataset[i] for i in idx], [graphs[i] for i in idx],
                                config.lam, config.match)
            total += float(losses.detach().sum())
            if config.lr > 0:
                opt.zero_grad()
                losses.mean().backward()
                opt.step()
        curve.append(total / len(dataset))
        if epoch % 50 == 0:
            log.info("epoch %d loss %.6f", epoch, curve[-1])
        if callback is not None and callback(epoch, curve):
            break
    return model, curve


def evaluate(model: DynamicsModel, dataset: list[Transition], lam: float = 0.1, omega: float = 0.1,
             match: str = "full") -> float:
    """Mean single-step Chamfer loss."""
    with torch.no_grad():
        vals = [float(batch_loss(model, [t], [build_graph(t.scene, omega)], lam, match)[0])
                for t in dataset]
    return float(np.mean(vals))
