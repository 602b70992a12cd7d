"""Closed-loop pushing with the learned model.

Loads a checkpoint (for example the one written by 02_train_dynamics.py)
and runs a few seeded collecting episodes: perceive, plan against the
target's density field, execute the first push, repeat.

    python3 demos/03_closed_loop.py model.gsdyn [n_trials] [out_dir]
"""
import sys
from pathlib import Path

from gsmpc import io
from gsmpc.dynamics import DynamicsModel
from gsmpc.experiments import evaluate_task, summarize
from gsmpc.planner import PlanConfig
from gsmpc.scene_init import PerceptionConfig
from gsmpc.sim import SimConfig
from gsmpc.splat_core import FitConfig

model = DynamicsModel.load(sys.argv[1])
n_trials = int(sys.argv[2]) if len(sys.argv) > 2 else 3
out = Path(sys.argv[3] if len(sys.argv) > 3 else "demo_out/closed_loop")

cfg = SimConfig(n_particles=10)
perception = PerceptionConfig(n_splats=20, fit=FitConfig(epochs=50))
plan_config = PlanConfig(horizon=1, samples=32, grad_steps=10, biased=True, max_mpc_iters=30)
results = evaluate_task(model, n_trials, 0, cfg, perception, plan_config, render_view=0)

for i, r in enumerate(results):
    print(f"trial {i}: success {r.success} after {len(r.episode)} pushes, "
          f"state error {r.initial_chamfer:.5f} -> {r.final_chamfer:.5f}")
    for s in r.episode.steps:
        io.save_png(out / f"trial_{i:02d}" / f"iter_{s.iter:02d}.png", s.render)
print(summarize("collecting", results))
