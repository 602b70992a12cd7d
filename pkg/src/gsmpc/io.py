"""On-disk formats: splat scenes, cameras, images, observation bundles,
datasets, checkpoints' companions (CSV curves) and plan files."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import MissingFrames, ParseError
from .geometry import Box
from .scene_init import RGBDObservation
from .sim import Action, ParticleState, Region, TaskSpec
from .splat_core import CameraView, Image, SplatScene


def _read_json(path) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from e


def write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


# -- splat scenes ------------------------------------------------------------

def scene_to_json(scene: SplatScene) -> dict:
    sc = scene.numpy()
    splats = [{"g": sc.g[i].tolist(), "r": sc.r[i].tolist(), "s": sc.s[i].tolist(),
               "sigma": float(sc.sigma[i]), "c": sc.c[i].tolist()} for i in range(len(sc))]
    return {"frame_id": int(sc.frame_id), "splats": splats}


def scene_from_json(obj: dict) -> SplatScene:
    try:
        sp = obj["splats"]
        if not sp:
            return SplatScene.empty(int(obj.get("frame_id", 0)))
        return SplatScene(np.array([s["g"] for s in sp], dtype=np.float64),
                          np.array([s["r"] for s in sp], dtype=np.float64),
                          np.array([s["s"] for s in sp], dtype=np.float64),
                          np.array([s["sigma"] for s in sp], dtype=np.float64),
                          np.array([s["c"] for s in sp], dtype=np.float64),
                          int(obj.get("frame_id", 0)))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed splat scene: {e}") from e


def save_scene(path, scene: SplatScene):
    write_json(path, scene_to_json(scene))


def load_scene(path) -> SplatScene:
    return scene_from_json(_read_json(path))


# -- cameras and images ------------------------------------------------------

def camera_to_json(view: CameraView) -> dict:
    return {"pose": np.asarray(view.pose).tolist(), "fx": view.fx, "fy": view.fy, "cx": view.cx,
            "cy": view.cy, "width": view.width, "height": view.height}


def camera_from_json(obj: dict) -> CameraView:
    try:
        return CameraView(np.array(obj["pose"], dtype=np.float64), float(obj["fx"]), float(obj["fy"]),
                          float(obj["cx"]), float(obj["cy"]), int(obj["width"]), int(obj["height"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed camera: {e}") from e


def save_camera(path, view: CameraView):
    write_json(path, camera_to_json(view))


def load_camera(path) -> CameraView:
    return camera_from_json(_read_json(path))


def save_png(path, rgb: np.ndarray):
    """8-bit RGB PNG; values are clipped to [0, 1] and rounded."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    arr = np.round(np.clip(np.asarray(rgb, dtype=np.float64), 0, 1) * 255).astype(np.uint8)
    PILImage.fromarray(arr, "RGB").save(path)


def load_png(path) -> np.ndarray:
    with PILImage.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def save_depth(path, depth: np.ndarray):
    np.asarray(depth, dtype="<f4").tofile(path)


def load_depth(path, width: int, height: int) -> np.ndarray:
    d = np.fromfile(path, dtype="<f4")
    if d.size != width * height:
        raise ParseError(f"{path}: {d.size} depth values for a {width}x{height} image")
    return d.reshape(height, width).astype(np.float64)


# -- observation bundles -----------------------------------------------------

def save_observations(directory, obs: list[RGBDObservation]):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, o in enumerate(obs):
        save_png(d / f"view_{i:02d}.png", o.image.rgb)
        save_depth(d / f"depth_{i:02d}.bin", o.image.depth)
        save_camera(d / f"camera_{i:02d}.json", o.view)


def load_observations(directory) -> list[RGBDObservation]:
    d = Path(directory)
    cams = sorted(d.glob("camera_*.json"))
    if not cams:
        raise MissingFrames(f"{d}: no camera_*.json files")
    out = []
    for cam_path in cams:
        idx = cam_path.stem.split("_")[1]
        view = load_camera(cam_path)
        rgb = load_png(d / f"view_{idx}.png")
        depth = load_depth(d / f"depth_{idx}.bin", view.width, view.height)
        out.append(RGBDObservation(Image(rgb, depth), view))
    return out


# -- particle states, actions, tasks -----------------------------------------

def state_to_json(state: ParticleState) -> dict:
    return {"radius": state.radius, "positions": state.positions.tolist()}


def state_from_json(obj: dict, workspace: Box) -> ParticleState:
    pos = np.array(obj["positions"], dtype=np.float64).reshape(-1, 3)
    return ParticleState(pos, float(obj["radius"]), workspace)


def action_to_json(action: Action) -> dict:
    return {"start": action.start.tolist(), "end": action.end.tolist()}


def action_from_json(obj: dict) -> Action:
    try:
        return Action(np.array(obj["start"], dtype=np.float64), np.array(obj["end"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed action: {e}") from e


def task_to_json(task: TaskSpec) -> dict:
    return {"kind": task.kind.value, "tolerance": task.tolerance,
            "count_tolerance": task.count_tolerance,
            "regions": [{"center": r.center.tolist(), "radius": r.radius, "count": r.count}
                        for r in task.target_regions]}


def task_from_json(obj: dict) -> TaskSpec:
    regions = [Region(r["center"], r["radius"], r.get("count", 0)) for r in obj["regions"]]
    return TaskSpec(obj["kind"], regions, obj.get("tolerance", 0.005), obj.get("count_tolerance", 0.25))


# -- CSV ----------------------------------------------------------------------

def write_csv(path, header: list[str], rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
