"""Perceive one simulated frame as Gaussian splats.

Scatter 10 particles on the table, render 8 RGBD views, lift them to a point
cloud, pick splat centers by farthest point sampling and fit the splats to
the images. Writes ground-truth and reconstructed views side by side.

    python3 demos/01_perceive_frame.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np
import torch

from gsmpc import io
from gsmpc.planner import sim_perception
from gsmpc.scene_init import PerceptionConfig, perceive
from gsmpc.sim import SimConfig, make_rig, observe, scatter
from gsmpc.splat_core import FitConfig, render, scene_loss

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/perceive")
cfg = SimConfig(n_particles=10)
rig = make_rig(8, cfg, size=64)
state = scatter(cfg.n_particles, cfg, np.random.default_rng(0))
obs = observe(state, rig, cfg)

history = []
perception = sim_perception(PerceptionConfig(n_splats=20, fit=FitConfig(epochs=300)), cfg)
scene = perceive(obs, cfg.perception_box, perception, history=history)
print(f"{len(scene)} splats kept; loss summed over views {history[0]:.4f} -> {min(history):.4f} "
      f"in {len(history)} epochs")

views = [(o.image, o.view) for o in obs]
with torch.no_grad():
    per_view = float(scene_loss(scene, views, cfg.background_color)) / len(views)
print(f"mean per-view recon loss {per_view:.4f}")

for k, o in enumerate(obs[:4]):
    recon = render(scene, o.view, cfg.background_color).rgb
    io.save_png(out / f"view_{k}.png", np.concatenate([o.image.rgb, recon], axis=1))
io.save_scene(out / "scene.json", scene)
print(f"wrote {out}/view_*.png (left: observed, right: splats) and scene.json")
