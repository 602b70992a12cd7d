"""Demonstration trajectories rolled out with the oracle policy."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import AlreadySolved
from ..splat_core import CameraView
from .camera import observe
from .physics import Action, ActionLimits, ParticleState, SimConfig, scatter, step
from .tasks import TaskKind, TaskSpec, oracle_policy, random_task


@dataclass
class Trajectory:
    """Ground-truth states and the actions between them.

    Observations are a pure function of (state, rig, config), so they are
    rendered on demand by :meth:`observations` instead of being stored.
    """

    states: list[ParticleState]
    actions: list[Action]
    rig: list[CameraView]
    task: TaskSpec
    config: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("a trajectory needs exactly one more state than actions")

    def __len__(self) -> int:
        return len(self.actions)

    def observations(self, t: int):
        return observe(self.states[t], self.rig, self.config)

    def transitions(self):
        """Yield (O_t, u_t, O_{t+1}) triples."""
        for t, u in enumerate(self.actions):
            yield self.observations(t), u, self.observations(t + 1)


def random_push(state: ParticleState, rng: np.random.Generator, limits: ActionLimits) -> Action:
    """A push starting just behind a random particle in a random direction."""
    i = int(rng.integers(len(state))) if len(state) else 0
    base = state.xy[i] if len(state) else np.zeros(2)
    ang = rng.uniform(0, 2 * np.pi)
    dirn = np.array([np.cos(ang), np.sin(ang)])
    length = rng.uniform(limits.min_push, limits.max_push)
    start = base - dirn * (state.radius + 0.01)
    return Action.from_vector(limits.project(np.concatenate([start, start + dirn * length])))


def gen_dataset(n_traj: int, steps_per_traj: int, task_mix=("collecting",),
                rig: list[CameraView] | None = None, seed: int = 0,
                config: SimConfig | None = None) -> list[Trajectory]:
    """Seeded oracle demonstrations; each trajectory draws from its own
    child seed so trajectories are independent of generation order."""
    from .camera import make_rig

    config = config or SimConfig()
    rig = rig if rig is not None else make_rig(8, config)
    limits = ActionLimits(config.workspace, config.min_push, config.max_push)
    kinds = [TaskKind(k) for k in task_mix]
    out = []
    for child in np.random.SeedSequence(seed).spawn(n_traj):
        rng = np.random.default_rng(child)
        task = random_task(kinds[int(rng.integers(len(kinds)))], config, rng)
        state = scatter(config.n_particles, config, rng)
        states, actions = [state], []
        for _ in range(steps_per_traj):
            try:
                act = oracle_policy(state, task, rng, limits)
            except AlreadySolved:
                act = random_push(state, rng, limits)
            state = step(state, act, config.pusher_len, limits, config.substeps,
                         config.resolver_iters)
            states.append(state)
            actions.append(act)
        out.append(Trajectory(states, actions, rig, task, config))
    return out
