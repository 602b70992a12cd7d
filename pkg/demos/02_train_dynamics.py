"""Learn splat dynamics from simulated pushing demonstrations.

Generates oracle demonstrations with 10 particles, perceives every frame as
splats, trains the graph dynamics model and compares its one-step Chamfer
error against predicting "nothing moves".

    python3 demos/02_train_dynamics.py [out_dir] [n_traj] [epochs]
"""
import sys
from pathlib import Path

import numpy as np

from gsmpc.dynamics import TrainConfig, chamfer_loss, evaluate
from gsmpc.experiments import perceive_trajectories, train_model, transitions
from gsmpc.scene_init import PerceptionConfig
from gsmpc.sim import SimConfig, gen_dataset, make_rig
from gsmpc.splat_core import FitConfig

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/dynamics")
n_traj = int(sys.argv[2]) if len(sys.argv) > 2 else 10
epochs = int(sys.argv[3]) if len(sys.argv) > 3 else 100

cfg = SimConfig(n_particles=10)
trajs = gen_dataset(n_traj, 8, ("collecting",), make_rig(8, cfg), seed=0, config=cfg)
perception = PerceptionConfig(n_splats=20, fit=FitConfig(epochs=50))
scenes = perceive_trajectories(trajs, perception)

split = max(1, int(0.8 * n_traj))
train_set = transitions(trajs[:split], scenes[:split])
test_set = transitions(trajs[split:], scenes[split:]) or train_set
print(f"{len(train_set)} training and {len(test_set)} held-out transitions")

model, curve = train_model(train_set, TrainConfig(epochs=epochs, batch_size=16))
print(f"training loss {curve[0]:.5f} -> {curve[-1]:.5f}")

noop = np.mean([float(chamfer_loss(t.scene, t.next_scene)) for t in test_set])
print(f"held-out one-step Chamfer: model {evaluate(model, test_set):.5f}, no-op {noop:.5f}")

out.mkdir(parents=True, exist_ok=True)
model.save(out / "model.gsdyn")
print(f"wrote {out}/model.gsdyn")
