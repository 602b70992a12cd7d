"""End-to-end pipelines shared by the command line and the test-suite:
perceiving demonstration data, training a model on it and running seeded
closed-loop trials."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicsModel, TrainConfig, Transition, train
from .planner import Episode, PlanConfig, mpc_execute, perceive_state, target_scene
from .scene_init import PerceptionConfig
from .sim import SimConfig, Trajectory, make_rig, random_task, scatter, success

log = logging.getLogger(__name__)


def perceive_trajectories(trajs: list[Trajectory], perception: PerceptionConfig) -> list[list]:
    """Splat scenes for every state of every trajectory."""
    out = []
    for k, tr in enumerate(trajs):
        out.append([perceive_state(s, tr.rig, tr.config, perception, frame_id=t)
                    for t, s in enumerate(tr.states)])
        log.info("perceived trajectory %d/%d", k + 1, len(trajs))
    return out


def transitions(trajs: list[Trajectory], scenes: list[list]) -> list[Transition]:
    """(Z_t, u_t, Z_t+1) triples, skipping frames where nothing was perceived."""
    out = []
    for tr, zs in zip(trajs, scenes):
        for t, u in enumerate(tr.actions):
            if len(zs[t]) and len(zs[t + 1]):
                out.append(Transition(zs[t], u.as_vector(), zs[t + 1]))
    return out


def train_model(data: list[Transition], config: TrainConfig, hidden: int = 256, gamma: int = 2,
                length_scale: float = 0.1, callback=None):
    model = DynamicsModel(hidden, gamma, length_scale, seed=config.seed)
    return train(model, data, config, callback)


@dataclass
class TrialResult:
    seed: int
    success: bool
    initial_chamfer: float
    final_chamfer: float
    episode: Episode


def run_trial(model: DynamicsModel, seed: int, sim_config: SimConfig, perception: PerceptionConfig,
              plan_config: PlanConfig, task_kind: str = "collecting", n_cameras: int = 8,
              image_size: int = 64, target_radius: float | None = 0.06,
              render_view: int | None = None) -> TrialResult:
    """One seeded episode: random task and scatter, perceived target, MPC.

    Scatters are redrawn until the task is not already solved.
    """
    rng = np.random.default_rng(seed)
    rig = make_rig(n_cameras, sim_config, size=image_size)
    task = random_task(task_kind, sim_config, rng, radius=target_radius)
    state = scatter(sim_config.n_particles, sim_config, rng)
    for _ in range(100):
        if not success(state, task):
            break
        state = scatter(sim_config.n_particles, sim_config, rng)
    target, goal = target_scene(task, sim_config.n_particles, rig, sim_config, perception)
    ep = mpc_execute(state, task, target, model, plan_config, rig, int(rng.integers(2**31)),
                     sim_config, perception, goal, render_view)
    return TrialResult(seed, ep.solved, ep.initial_chamfer, ep.final_chamfer, ep)


def trial_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def evaluate_task(model: DynamicsModel, n_trials: int, seed: int, sim_config: SimConfig,
                  perception: PerceptionConfig, plan_config: PlanConfig, **kw) -> list[TrialResult]:
    results = []
    for i, s in enumerate(trial_seeds(seed, n_trials)):
        results.append(run_trial(model, s, sim_config, perception, plan_config, **kw))
        r = results[-1]
        log.info("trial %d: success %s chamfer %.6f -> %.6f (%d steps)", i, r.success,
                 r.initial_chamfer, r.final_chamfer, len(r.episode))
    return results


def summarize(task: str, results: list[TrialResult]) -> dict:
    if not results:
        return {"task": task, "success_rate": None, "state_error": None, "n_trials": 0}
    return {"task": task, "success_rate": float(np.mean([r.success for r in results])),
            "state_error": float(np.mean([r.final_chamfer for r in results])),
            "n_trials": len(results)}
