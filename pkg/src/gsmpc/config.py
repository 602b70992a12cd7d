"""Run configuration: one JSON document with sim / fit / train / plan sections.

Every field has a default. Unknown sections or keys are rejected, and
dotted command-line overrides such as ``sim.n_particles=20`` are applied on
top of the file.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .dynamics import TrainConfig
from .errors import ParseError
from .planner import PlanConfig
from .scene_init import PerceptionConfig
from .sim import SimConfig
from .splat_core import FitConfig


@dataclass
class SimSection:
    n_particles: int = 50
    radius: float = 0.005
    pusher_len: float = 0.10
    half_extent: float = 0.12
    min_push: float = 0.02
    max_push: float = 0.20
    substeps: int = 20
    resolver_iters: int = 10
    n_cameras: int = 8
    image_size: int = 64
    n_traj: int = 100
    steps_per_traj: int = 8
    task_mix: list = field(default_factory=lambda: ["collecting"])

    def sim_config(self) -> SimConfig:
        keys = {f.name for f in fields(SimConfig)}
        return SimConfig(**{k: v for k, v in asdict(self).items() if k in keys})


@dataclass
class FitSection:
    lr: float = 0.001
    epochs: int = 2000
    beta: float = 0.25
    n_splats: int = 0          # 0 means twice the particle count
    default_scale: float = 0.0025
    default_sigma: float = 0.9
    sigma_min: float = 0.05

    def perception(self, n_particles: int, seed: int = 0) -> PerceptionConfig:
        k = self.n_splats or 2 * n_particles
        return PerceptionConfig(k, self.default_scale, self.default_sigma, self.sigma_min,
                                FitConfig(self.lr, self.epochs, self.beta), seed)


@dataclass
class TrainSection:
    lr: float = 0.001
    epochs: int = 100
    batch_size: int = 1
    lam: float = 0.1
    omega: float = 0.1
    match: str = "full"
    hidden: int = 256
    gamma: int = 2
    length_scale: float = 0.1

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.lr, self.epochs, self.batch_size, self.lam, seed, self.omega, self.match)


@dataclass
class PlanSection:
    horizon: int = 3
    samples: int = 16
    grad_steps: int = 10
    action_lr: float = 0.01
    grid: int = 32
    max_mpc_iters: int = 30
    max_halvings: int = 5
    biased: bool = False
    task: str = "collecting"
    n_trials: int = 20
    target_radius: float = 0.06

    def plan_config(self, sim: SimSection, omega: float = 0.1) -> PlanConfig:
        return PlanConfig(self.horizon, self.samples, self.grad_steps, self.action_lr, self.grid,
                          sim.radius, self.max_mpc_iters, self.max_halvings, self.biased, omega)


SECTIONS = {"sim": SimSection, "fit": FitSection, "train": TrainSection, "plan": PlanSection}


@dataclass
class RunConfig:
    sim: SimSection = field(default_factory=SimSection)
    fit: FitSection = field(default_factory=FitSection)
    train: TrainSection = field(default_factory=TrainSection)
    plan: PlanSection = field(default_factory=PlanSection)
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        seed = data.pop("seed", 0)
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ParseError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        parts = {}
        for name, klass in SECTIONS.items():
            section = data.get(name, {})
            allowed = {f.name for f in fields(klass)}
            bad = set(section) - allowed
            if bad:
                raise ParseError(f"unknown key(s) in [{name}]: {', '.join(sorted(bad))}")
            parts[name] = klass(**section)
        return cls(seed=int(seed), **parts)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as f:
                return cls.from_dict(json.load(f))
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: {e}") from e

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, overrides: list[str]) -> "RunConfig":
        """Apply ``section.key=value`` strings; values are parsed as JSON when
        possible and kept as strings otherwise."""
        data = self.to_dict()
        for item in overrides:
            key, sep, raw = item.partition("=")
            parts = key.split(".")
            if not sep or len(parts) != 2 or parts[0] not in SECTIONS:
                raise ParseError(f"override {item!r} is not of the form section.key=value")
            if parts[1] not in data[parts[0]]:
                raise ParseError(f"unknown key in [{parts[0]}]: {parts[1]}")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            data[parts[0]][parts[1]] = value
        return RunConfig.from_dict(data)
