"""Desk-scale pushing simulator: physics, cameras, tasks and demonstrations."""
from .camera import make_rig, observe
from .dataset import Trajectory, gen_dataset, random_push
from .physics import Action, ActionLimits, ParticleState, SimConfig, relax, scatter, step
from .tasks import (Region, TaskKind, TaskSpec, hex_pile, oracle_policy, random_task,
                    state_error, success, target_state)
