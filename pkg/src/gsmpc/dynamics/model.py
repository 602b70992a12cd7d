"""Message-passing dynamics over splat graphs.

Each graph-conv layer is ``act(W_self h_i + W_neigh mean_{j in N(i)} h_j + b)``
with the mean over an empty neighborhood taken as zero. The encoder sees node
features with the push action appended, the message module is applied
``gamma`` times with shared weights, and a zero-initialized decoder emits a
translation and a quaternion update per node, so a fresh model predicts
"nothing moves".
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..errors import LengthMismatch, ShapeMismatch
from ..splat_core import SplatScene, as_tensor, normalize_quat, quat_multiply
from .graph import N_FEATURES, SceneGraph

ACTION_DIM = 4
OUT_DIM = 7
MAGIC = b"GSDYN1"


DENSE_MAX_NODES = 512


def neighbor_mean(h: torch.Tensor, src: torch.Tensor, dst: torch.Tensor, inv_deg: torch.Tensor) -> torch.Tensor:
    """Mean of neighbor features along the node axis (-2); zero when isolated."""
    agg = torch.zeros_like(h).index_add(-2, dst, h.index_select(-2, src))
    return agg * inv_deg[:, None]


def mean_operator(src: np.ndarray, dst: np.ndarray, n: int) -> torch.Tensor:
    """Dense (n, n) matrix M with M @ h equal to ``neighbor_mean``."""
    m = np.zeros((n, n))
    np.add.at(m, (dst, src), 1.0)
    deg = m.sum(1, keepdims=True)
    return torch.as_tensor(np.divide(m, deg, out=np.zeros_like(m), where=deg > 0))


class GraphConv(nn.Module):
    def __init__(self, d_in: int, d_out: int, generator: torch.Generator | None = None, zero: bool = False):
        super().__init__()
        self.w_self = nn.Parameter(torch.empty(d_out, d_in, dtype=torch.float64))
        self.w_neigh = nn.Parameter(torch.empty(d_out, d_in, dtype=torch.float64))
        self.bias = nn.Parameter(torch.empty(d_out, dtype=torch.float64))
        bound = 1.0 / math.sqrt(d_in)
        with torch.no_grad():
            for p in (self.w_self, self.w_neigh, self.bias):
                if zero:
                    p.zero_()
                else:
                    p.uniform_(-bound, bound, generator=generator)

    def forward(self, h, src, dst, inv_deg, dense=None):
        agg = dense @ h if dense is not None else neighbor_mean(h, src, dst, inv_deg)
        return h @ self.w_self.T + agg @ self.w_neigh.T + self.bias


@dataclass(frozen=True)
class ModelSpec:
    hidden: int = 256
    gamma: int = 2
    length_scale: float = 0.1
    seed: int = 0


class DynamicsModel(nn.Module):
    """Encoder (2 layers) -> message module (2 layers, applied gamma times) ->
    decoder (1 layer, 7 outputs: translation then raw quaternion).

    Positions, scales and actions are divided by ``length_scale`` on input
    and predicted translations multiplied by it on output, keeping network
    activations at unit scale for table-sized scenes.
    """

    def __init__(self, hidden: int = 256, gamma: int = 2, length_scale: float = 0.1, seed: int = 0):
        super().__init__()
        if gamma < 0:
            raise ValueError("gamma must be non-negative")
        self.spec = ModelSpec(hidden, gamma, length_scale, seed)
        gen = torch.Generator().manual_seed(seed)
        d_in = N_FEATURES + ACTION_DIM
        self.enc = nn.ModuleList([GraphConv(d_in, hidden, gen), GraphConv(hidden, hidden, gen)])
        self.msg = nn.ModuleList([GraphConv(hidden, hidden, gen), GraphConv(hidden, hidden, gen)])
        self.dec = GraphConv(hidden, OUT_DIM, gen, zero=True)

    @property
    def gamma(self) -> int:
        return self.spec.gamma

    def _scale_inputs(self, nodes: torch.Tensor, action: torch.Tensor, per_node: bool) -> torch.Tensor:
        ls = self.spec.length_scale
        scale = torch.ones(N_FEATURES, dtype=nodes.dtype)
        scale[8:14] = 1.0 / ls
        x = nodes * scale
        if per_node:
            return torch.cat([x, action / ls], -1)
        if action.ndim > 1 and x.ndim == 2:
            x = x.expand(action.shape[:-1] + x.shape)
        u = (action / ls)[..., None, :].expand(x.shape[:-1] + (ACTION_DIM,))
        return torch.cat([x, u], -1)

    def forward(self, graph: SceneGraph, action, per_node: bool = False) -> tuple[torch.Tensor, torch.Tensor]:
        """Per-node (delta_g, delta_r); ``action`` is (4,) or (K, 4) for K
        candidate pushes evaluated on the same graph, in which case node
        features may also carry the leading K axis. With ``per_node`` the
        action is an (N, 4) array giving each node its own push, as used for
        disjoint unions of several graphs."""
        nodes = graph.nodes
        action = as_tensor(action)
        if nodes.shape[-1] != N_FEATURES or action.shape[-1] != ACTION_DIM:
            raise ShapeMismatch(f"expected node width {N_FEATURES} and action width {ACTION_DIM}")
        src_np, dst_np = graph.directed
        src, dst = torch.as_tensor(src_np), torch.as_tensor(dst_np)
        deg = np.bincount(dst_np, minlength=nodes.shape[-2]).astype(np.float64)
        inv_deg = torch.as_tensor(np.where(deg > 0, 1.0 / np.maximum(deg, 1), 0.0))
        n = nodes.shape[-2]
        dense = mean_operator(src_np, dst_np, n) if n <= DENSE_MAX_NODES else None
        args = (src, dst, inv_deg, dense)

        h = self._scale_inputs(nodes, action, per_node)
        for layer in self.enc:
            h = torch.relu(layer(h, *args))
        for _ in range(self.gamma):
            for layer in self.msg:
                h = torch.relu(layer(h, *args))
        out = self.dec(h, *args)
        delta_g = out[..., :3] * self.spec.length_scale
        identity = torch.tensor([1.0, 0.0, 0.0, 0.0], dtype=out.dtype)
        delta_r = normalize_quat(out[..., 3:] + identity)
        return delta_g, delta_r

    # -- checkpoint ----------------------------------------------------------

    def save(self, path):
        """Little-endian f32 weights after a header: magic, input width, hidden
        width, output width, gamma and the input length scale."""
        d_in = N_FEATURES + ACTION_DIM
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<4If", d_in, self.spec.hidden, OUT_DIM, self.spec.gamma,
                                self.spec.length_scale))
            for p in self.parameters():
                f.write(p.detach().cpu().numpy().astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "DynamicsModel":
        with open(path, "rb") as f:
            data = f.read()
        if data[:6] != MAGIC:
            raise ValueError(f"{path}: not a dynamics checkpoint")
        d_in, hidden, d_out, gamma, ls = struct.unpack_from("<4If", data, 6)
        if d_in != N_FEATURES + ACTION_DIM or d_out != OUT_DIM:
            raise ShapeMismatch(f"{path}: layer widths {d_in}->{d_out} do not match this model")
        model = cls(hidden, gamma, float(np.float32(ls)))
        flat = np.frombuffer(data, dtype="<f4", offset=6 + struct.calcsize("<4If"))
        expected = sum(p.numel() for p in model.parameters())
        if flat.size != expected:
            raise ShapeMismatch(f"{path}: {flat.size} weights, expected {expected}")
        off = 0
        with torch.no_grad():
            for p in model.parameters():
                p.copy_(torch.as_tensor(flat[off: off + p.numel()].astype(np.float64)).reshape(p.shape))
                off += p.numel()
        return model


def apply(scene: SplatScene, deltas) -> SplatScene:
    """Translate and left-rotate each splat; color, opacity and scale are kept."""
    delta_g, delta_r = deltas
    n = scene.g.shape[-2] if scene.g.ndim > 1 else len(scene)
    if delta_g.shape[-2] != n or delta_r.shape[-2] != n:
        raise LengthMismatch(f"{delta_g.shape[-2]} deltas for {n} splats")
    sc = scene.tensors()
    g = sc.g + as_tensor(delta_g)
    r = normalize_quat(quat_multiply(as_tensor(delta_r), sc.r))
    out = SplatScene(g, r, sc.s, sc.sigma, sc.c, scene.frame_id)
    return out if isinstance(delta_g, torch.Tensor) or scene.is_tensor else out.numpy()


def predict(model: DynamicsModel, scene: SplatScene, action, edges: np.ndarray | None = None,
            omega: float = 0.1) -> SplatScene:
    """One model step. ``edges`` freezes the graph topology when given."""
    from .graph import node_features, radius_edges

    if edges is None:
        edges = radius_edges(scene.g[0] if scene.g.ndim == 3 else scene.g, omega)
    graph = SceneGraph(node_features(scene), edges, np.arange(scene.g.shape[-2]))
    return apply(scene, model(graph, action))


def rollout(model: DynamicsModel, scene: SplatScene, actions, omega: float = 0.1,
            edges: np.ndarray | None = None) -> list[SplatScene]:
    """Scenes after each action, starting with ``scene`` itself.

    The radius graph is rebuilt before every step unless ``edges`` is given.
    """
    out = [scene]
    for u in actions:
        if hasattr(u, "as_vector"):
            u = u.as_vector()
        out.append(predict(model, out[-1], u, edges, omega))
    return out
