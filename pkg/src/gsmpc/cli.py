"""Command-line entry point: ``gsmpc <command> [options]``.

Commands: gen-data, fit, train, plan, eval, render. Every command is a pure
function of its inputs, its configuration and ``--seed``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import torch

from . import io
from .config import RunConfig
from .dynamics import DynamicsModel, Transition
from .errors import EmptyDataset, GsmpcError, MissingFrames
from .experiments import evaluate_task, summarize, train_model
from .planner import plan, sim_perception
from .scene_init import perceive
from .sim import ActionLimits, gen_dataset, make_rig
from .splat_core import as_numpy, render, scene_loss

log = logging.getLogger("gsmpc")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise GsmpcError(f"usage: {message}")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="global seed (overrides the config)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--threads", type=int, default=1, help="torch intra-op threads")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value; repeatable")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gsmpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="simulate oracle demonstrations and write RGBD bundles")
    _common(p)

    p = sub.add_parser("fit", help="perceive every frame of a dataset as a splat scene")
    _common(p)
    p.add_argument("dataset", type=Path)

    p = sub.add_parser("train", help="train the dynamics model on fitted scenes")
    _common(p)
    p.add_argument("scenes", type=Path, help="output directory of the fit command")

    p = sub.add_parser("plan", help="plan pushes from a scene toward a target scene")
    _common(p)
    p.add_argument("scene", type=Path)
    p.add_argument("target", type=Path)
    p.add_argument("--checkpoint", type=Path, required=True)

    p = sub.add_parser("eval", help="closed-loop trials with a trained model")
    _common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--task", help="task kind (overrides plan.task)")
    p.add_argument("--n-trials", type=int, help="number of trials (overrides plan.n_trials)")

    p = sub.add_parser("render", help="render a splat scene from a camera to PNG")
    _common(p)
    p.add_argument("scene", type=Path)
    p.add_argument("camera", type=Path)
    p.add_argument("png", type=Path)
    p.add_argument("--background", type=float, nargs=3, default=(0.0, 0.0, 0.0))
    return parser


def _split_overrides(argv: list[str]) -> list[str]:
    """Turn ``--section.key=value`` flags into ``--set section.key=value``."""
    out = []
    for a in argv:
        head = a[2:].split("=", 1)[0] if a.startswith("--") else ""
        if "." in head and "=" in a:
            out += ["--set", a[2:]]
        else:
            out.append(a)
    return out


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    cfg = cfg.with_overrides(args.overrides)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


# -- commands -------------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig, out: Path) -> dict:
    sim = cfg.sim.sim_config()
    rig = make_rig(cfg.sim.n_cameras, sim, size=cfg.sim.image_size)
    trajs = gen_dataset(cfg.sim.n_traj, cfg.sim.steps_per_traj, tuple(cfg.sim.task_mix), rig,
                        cfg.seed, sim)
    root = out / "dataset"
    for k, tr in enumerate(trajs):
        tdir = root / f"traj_{k:04d}"
        io.write_json(tdir / "task.json", io.task_to_json(tr.task))
        for t, state in enumerate(tr.states):
            sdir = tdir / f"step_{t:03d}"
            io.save_observations(sdir, tr.observations(t))
            io.write_json(sdir / "particles.json", io.state_to_json(state))
            if t < len(tr.actions):
                io.write_json(sdir / "action.json", io.action_to_json(tr.actions[t]))
    manifest = {"n_traj": len(trajs), "steps_per_traj": cfg.sim.steps_per_traj,
                "n_frames": sum(len(tr.states) for tr in trajs), "n_particles": sim.n_particles,
                "n_cameras": len(rig), "seed": cfg.seed, "config": cfg.to_dict()}
    io.write_json(root / "manifest.json", manifest)
    return manifest


def _frames(dataset: Path) -> list[Path]:
    frames = sorted(dataset.glob("traj_*/step_*"))
    if not frames:
        raise MissingFrames(f"{dataset}: no traj_*/step_* frame directories")
    return frames


def cmd_fit(cfg: RunConfig, dataset: Path, out: Path) -> int:
    """Perceive each frame; frames whose scene file exists are skipped."""
    if (dataset / "dataset").is_dir():
        dataset = dataset / "dataset"
    sim = cfg.sim.sim_config()
    perception = sim_perception(cfg.fit.perception(sim.n_particles, cfg.seed), sim)
    root = out / "scenes"
    rows = []
    for frame in _frames(dataset):
        rel = Path(frame.parent.name) / frame.name
        scene_path = root / rel.with_suffix(".json")
        loss_path = root / rel.with_suffix(".loss")
        if not (scene_path.exists() and loss_path.exists()):
            obs = io.load_observations(frame)
            scene = perceive(obs, sim.perception_box, perception, frame_id=int(frame.name.split("_")[1]))
            with torch.no_grad():
                views = [(o.image, o.view) for o in obs]
                loss = float(scene_loss(scene, views, perception.fit.background)) / len(views)
            io.save_scene(scene_path, scene)
            if (frame / "action.json").exists():
                (root / rel.parent).mkdir(parents=True, exist_ok=True)
                io.write_json(root / rel.parent / f"{frame.name}.action.json",
                              json.loads((frame / "action.json").read_text()))
            loss_path.write_text(repr(loss) + "\n")
            log.info("fit %s loss %.5f (%d splats)", rel, loss, len(scene))
        rows.append((rel.parent.name, rel.name, float(loss_path.read_text())))
    io.write_csv(out / "recon_loss.csv", ["trajectory", "step", "recon_loss"], rows)
    return len(rows)


def load_transitions(scenes_dir: Path) -> list[Transition]:
    root = scenes_dir / "scenes" if (scenes_dir / "scenes").is_dir() else scenes_dir
    data = []
    for tdir in sorted(root.glob("traj_*")):
        for act_path in sorted(tdir.glob("step_*.action.json")):
            step = act_path.name.split(".")[0]
            t = int(step.split("_")[1])
            cur, nxt = tdir / f"{step}.json", tdir / f"step_{t + 1:03d}.json"
            if not (cur.exists() and nxt.exists()):
                continue
            z0, z1 = io.load_scene(cur), io.load_scene(nxt)
            if len(z0) and len(z1):
                u = io.action_from_json(io._read_json(act_path)).as_vector()
                data.append(Transition(z0, u, z1))
    return data


def cmd_train(cfg: RunConfig, scenes_dir: Path, out: Path) -> list[float]:
    data = load_transitions(scenes_dir)
    if not data:
        raise EmptyDataset(f"{scenes_dir}: no fitted transitions found")
    tc = cfg.train
    model, curve = train_model(data, tc.train_config(cfg.seed), tc.hidden, tc.gamma, tc.length_scale)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.gsdyn")
    io.write_csv(out / "loss_curve.csv", ["epoch", "mean_loss"], enumerate(curve))
    return curve


def cmd_plan(cfg: RunConfig, scene_path: Path, target_path: Path, checkpoint: Path, out: Path) -> dict:
    sim = cfg.sim.sim_config()
    model = DynamicsModel.load(checkpoint)
    limits = ActionLimits(sim.workspace, sim.min_push, sim.max_push)
    result = plan(io.load_scene(scene_path), io.load_scene(target_path), model,
                  cfg.plan.plan_config(cfg.sim, cfg.train.omega), cfg.seed, limits)
    doc = result.to_json(cfg.seed)
    io.write_json(out / "plan.json", doc)
    return doc


def cmd_eval(cfg: RunConfig, checkpoint: Path, out: Path, task: str | None = None,
             n_trials: int | None = None) -> dict:
    task = task or cfg.plan.task
    n = cfg.plan.n_trials if n_trials is None else n_trials
    sim = cfg.sim.sim_config()
    model = DynamicsModel.load(checkpoint)
    results = evaluate_task(model, n, cfg.seed, sim, cfg.fit.perception(sim.n_particles, cfg.seed),
                            cfg.plan.plan_config(cfg.sim, cfg.train.omega), task_kind=task,
                            n_cameras=cfg.sim.n_cameras, image_size=cfg.sim.image_size,
                            target_radius=cfg.plan.target_radius if task == "collecting" else None,
                            render_view=0)
    report = summarize(task, results)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "report.json", report)
    io.write_csv(out / "report.csv", ["trial", "seed", "success", "initial_chamfer", "final_chamfer", "steps"],
                 [(i, r.seed, int(r.success), r.initial_chamfer, r.final_chamfer, len(r.episode))
                  for i, r in enumerate(results)])
    for i, r in enumerate(results):
        edir = out / f"trial_{i:03d}"
        io.write_csv(edir / "episode.csv", ["iter", "cost", "chamfer", "success"],
                     [(s.iter, s.cost, s.chamfer, int(s.success)) for s in r.episode.steps])
        for s in r.episode.steps:
            if s.render is not None:
                io.save_png(edir / f"render_{s.iter:03d}.png", s.render)
    return report


def cmd_render(scene_path: Path, camera_path: Path, png: Path, background=(0.0, 0.0, 0.0)):
    img = render(io.load_scene(scene_path), io.load_camera(camera_path), tuple(background))
    io.save_png(png, as_numpy(img.rgb))


def run(argv: list[str]) -> None:
    args = build_parser().parse_args(_split_overrides(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    torch.set_num_threads(max(1, args.threads))
    cfg = load_config(args)
    np.random.seed(cfg.seed)
    torch.manual_seed(cfg.seed)
    if args.command == "gen-data":
        cmd_gen_data(cfg, args.out)
    elif args.command == "fit":
        cmd_fit(cfg, args.dataset, args.out)
    elif args.command == "train":
        cmd_train(cfg, args.scenes, args.out)
    elif args.command == "plan":
        cmd_plan(cfg, args.scene, args.target, args.checkpoint, args.out)
    elif args.command == "eval":
        cmd_eval(cfg, args.checkpoint, args.out, args.task, args.n_trials)
    elif args.command == "render":
        cmd_render(args.scene, args.camera, args.png, args.background)


def main(argv: list[str] | None = None) -> int:
    try:
        run(sys.argv[1:] if argv is None else argv)
    except (GsmpcError, OSError, ValueError, KeyError) as e:
        msg = " ".join(str(e).split()) or type(e).__name__
        print(f"gsmpc: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
