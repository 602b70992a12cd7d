"""Gradient-based visual MPC over learned splat dynamics.

``plan`` samples K action sequences, rolls each through the dynamics model,
scores the final scene by how far its density field is from the target's on a
grid of query points, and refines the actions by gradient descent with a
backtracking step. ``mpc_execute`` closes the loop against the simulator:
perceive, plan, execute the first action, repeat.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .dynamics import DynamicsModel, SceneGraph, apply, node_features, radius_edges
from .errors import EmptyQuerySet, EmptyScene, NoValidActions
from .geometry import Box
from .scene_init import PerceptionConfig, perceive
from .sim import (Action, ActionLimits, ParticleState, SimConfig, TaskSpec, observe,
                  state_error, step, success, target_state)
from .splat_core import CameraView, SplatScene, as_numpy, as_tensor, density_field, render

log = logging.getLogger(__name__)


@dataclass
class PlanConfig:
    horizon: int = 3
    samples: int = 16
    grad_steps: int = 10
    action_lr: float = 0.01
    grid: int = 32
    query_z: float = 0.005
    max_mpc_iters: int = 30
    max_halvings: int = 5
    biased: bool = False
    omega: float = 0.1

    def __post_init__(self):
        if min(self.horizon, self.samples, self.grad_steps) < 1:
            raise ValueError("horizon, samples and grad_steps must be at least 1")
        if self.grid < 1:
            raise EmptyQuerySet("the query grid needs at least one point per side")

    def query_points(self, workspace: Box) -> np.ndarray:
        return workspace.grid(self.grid, self.grid, self.query_z)


@dataclass
class PlanResult:
    actions: list[Action]
    costs: np.ndarray
    k_opt: int
    initial_costs: np.ndarray = field(default=None, repr=False)
    history: np.ndarray = field(default=None, repr=False)

    @property
    def cost(self) -> float:
        return float(self.costs[self.k_opt])

    def to_json(self, seed: int) -> dict:
        return {"actions": [a.as_vector().tolist() for a in self.actions],
                "costs": [float(c) for c in self.costs], "k_opt": int(self.k_opt), "seed": int(seed)}


def cost(current: SplatScene, target: SplatScene, points, target_field: torch.Tensor | None = None) -> torch.Tensor:
    """Mean squared density difference over the query points.

    ``current`` may be batched over candidates, giving a (K,) result.
    ``target_field`` is the precomputed target density at ``points``.
    """
    pts = as_tensor(points).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyQuerySet("cost needs at least one query point")
    if target_field is None:
        target_field = density_field(target, pts)
    diff = density_field(current, pts) - target_field
    return (diff * diff).mean(-1)


def _broadcast(scene: SplatScene, k: int) -> SplatScene:
    sc = scene.tensors()
    return SplatScene(*(f.expand((k,) + f.shape) for f in (sc.g, sc.r, sc.s, sc.sigma, sc.c)),
                      frame_id=scene.frame_id)


def rollout_batch(model: DynamicsModel, scene: SplatScene, actions: torch.Tensor,
                  edges: np.ndarray) -> SplatScene:
    """Final scenes after (K, T, 4) action sequences on a frozen topology."""
    cur = _broadcast(scene, actions.shape[0])
    idx = np.arange(scene.g.shape[-2])
    for t in range(actions.shape[1]):
        graph = SceneGraph(node_features(cur), edges, idx)
        cur = apply(cur, model(graph, actions[:, t]))
    return cur


def sample_actions(rng: np.random.Generator, k: int, horizon: int, limits: ActionLimits,
                   scene: SplatScene | None = None, target: SplatScene | None = None,
                   biased: bool = False, attempts: int = 100) -> np.ndarray:
    """(k, horizon, 4) valid pushes.

    The default draw is a uniform start, uniform heading and uniform length.
    The biased draw starts just behind a random current splat and heads for
    a random target splat.
    """
    lo, hi = np.asarray(limits.workspace.lo[:2]), np.asarray(limits.workspace.hi[:2])
    out = np.empty((k, horizon, 4))
    biased = biased and scene is not None and target is not None and len(scene) and len(target)
    for i in range(k):
        for t in range(horizon):
            for _ in range(attempts):
                if biased:
                    src = as_numpy(scene.g)[rng.integers(len(scene)), :2]
                    dst = as_numpy(target.g)[rng.integers(len(target)), :2]
                    d = dst - src
                    n = np.linalg.norm(d)
                    dirn = d / n if n > 1e-9 else np.array([1.0, 0.0])
                    start = src - dirn * 0.015
                    length = n + 0.015
                else:
                    start = rng.uniform(lo, hi)
                    ang = rng.uniform(0, 2 * np.pi)
                    dirn = np.array([np.cos(ang), np.sin(ang)])
                    length = rng.uniform(limits.min_push, limits.max_push)
                u = limits.project(np.concatenate([start, start + dirn * length]))
                if limits.is_valid(Action.from_vector(u)):
                    out[i, t] = u
                    break
            else:
                raise NoValidActions(f"no valid push found in {attempts} draws")
    return out


def plan(scene: SplatScene, target: SplatScene, model: DynamicsModel, config: PlanConfig,
         seed: int, limits: ActionLimits, points=None) -> PlanResult:
    """Sample, refine by backtracked gradient descent, return the best candidate."""
    if len(scene) == 0:
        raise EmptyScene("cannot plan from an empty scene")
    rng = np.random.default_rng(seed)
    points = as_tensor(config.query_points(limits.workspace) if points is None else points)
    edges = radius_edges(scene.g, config.omega)
    u = sample_actions(rng, config.samples, config.horizon, limits, scene, target, config.biased)
    with torch.no_grad():
        tfield = density_field(target, points)

    def evaluate(acts: np.ndarray, grad: bool = False):
        ut = torch.tensor(acts, requires_grad=grad)
        if not grad:
            with torch.no_grad():
                return as_numpy(cost(rollout_batch(model, scene, ut, edges), target, points, tfield))
        c = cost(rollout_batch(model, scene, ut, edges), target, points, tfield)
        (g,) = torch.autograd.grad(c.sum(), ut)
        return as_numpy(c.detach()), as_numpy(g)

    initial = None
    history = []
    for it in range(config.grad_steps):
        c, g = evaluate(u, grad=True)
        if initial is None:
            initial = c.copy()
        history.append(c.copy())
        if config.action_lr == 0:
            continue
        # Backtracking: halve the step for candidates whose cost went up.
        pending = np.ones(len(u), dtype=bool)
        step_size = np.full(len(u), config.action_lr)
        for _ in range(config.max_halvings + 1):
            idx = np.nonzero(pending)[0]
            if len(idx) == 0:
                break
            trial = limits.project(u[idx] - step_size[idx, None, None] * g[idx])
            ct = evaluate(trial)
            ok = ct <= c[idx]
            u[idx[ok]] = trial[ok]
            pending[idx[ok]] = False
            step_size[idx] *= 0.5
    final = evaluate(u)
    history.append(final)
    k_opt = int(np.argmin(final))
    actions = [Action.from_vector(v) for v in u[k_opt]]
    return PlanResult(actions, final, k_opt, initial, np.stack(history))


@dataclass
class EpisodeStep:
    iter: int
    cost: float
    chamfer: float
    success: bool
    action: Action
    render: np.ndarray | None = field(default=None, repr=False)


@dataclass
class Episode:
    steps: list[EpisodeStep]
    initial_chamfer: float
    final_state: ParticleState
    solved: bool

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final_chamfer(self) -> float:
        return self.steps[-1].chamfer if self.steps else self.initial_chamfer


def sim_perception(perception: PerceptionConfig, sim_config: SimConfig) -> PerceptionConfig:
    """``perception`` with the fit background set to the simulator's table color."""
    fit = replace(perception.fit, background=tuple(sim_config.background_color))
    return replace(perception, fit=fit)


def perceive_state(state: ParticleState, rig: list[CameraView], sim_config: SimConfig,
                   perception: PerceptionConfig, frame_id: int = 0) -> SplatScene:
    """Render ``state`` from the rig and perceive it as splats."""
    return perceive(observe(state, rig, sim_config), sim_config.perception_box,
                    sim_perception(perception, sim_config), frame_id)


def target_scene(task: TaskSpec, n_particles: int, rig: list[CameraView], sim_config: SimConfig,
                 perception: PerceptionConfig) -> tuple[SplatScene, ParticleState]:
    """Splats perceived from a rendered solved configuration of ``task``."""
    goal = target_state(task, n_particles, sim_config)
    return perceive_state(goal, rig, sim_config, perception, frame_id=-1), goal


def mpc_execute(state: ParticleState, task: TaskSpec, target: SplatScene, model: DynamicsModel,
                config: PlanConfig, rig: list[CameraView], seed: int,
                sim_config: SimConfig | None = None, perception: PerceptionConfig | None = None,
                goal: ParticleState | None = None, render_view: int | None = 0) -> Episode:
    """Closed-loop execution: observe, perceive, plan, apply the first action.

    ``goal`` is the particle configuration used for the Chamfer state error;
    it defaults to the canonical solved state of ``task``.
    """
    sim_config = sim_config or SimConfig()
    perception = perception or PerceptionConfig()
    goal = goal if goal is not None else target_state(task, len(state), sim_config)
    limits = ActionLimits(sim_config.workspace, sim_config.min_push, sim_config.max_push)
    points = config.query_points(sim_config.workspace)
    seeds = np.random.SeedSequence(seed).generate_state(max(config.max_mpc_iters, 1))
    initial = state_error(state, goal)
    steps: list[EpisodeStep] = []
    solved = success(state, task)
    for it in range(config.max_mpc_iters):
        if solved:
            break
        scene = perceive_state(state, rig, sim_config, perception, frame_id=it)
        if len(scene) == 0:
            log.warning("iteration %d: nothing perceived, stopping", it)
            break
        result = plan(scene, target, model, config, int(seeds[it]), limits, points)
        action = result.actions[0]
        state = step(state, action, sim_config.pusher_len, limits, sim_config.substeps,
                     sim_config.resolver_iters)
        solved = success(state, task)
        img = None
        if render_view is not None:
            img = render(scene, rig[render_view], sim_config.background_color).rgb
        steps.append(EpisodeStep(it, result.cost, state_error(state, goal), solved, action, img))
        log.info("mpc %d cost %.5f chamfer %.6f success %s", it, result.cost, steps[-1].chamfer, solved)
    return Episode(steps, initial, state, solved)
