import json

import numpy as np
import pytest

from gsmpc import io
from gsmpc.config import RunConfig
from gsmpc.errors import MissingFrames, ParseError
from gsmpc.sim import Action, SimConfig, make_rig, observe, random_task, scatter
from gsmpc.splat_core import CameraView, SplatScene, normalize_quat

CFG = SimConfig(n_particles=5)


def random_scene(rng, n):
    return SplatScene(rng.normal(size=(n, 3)), normalize_quat(rng.normal(size=(n, 4))),
                      rng.uniform(0.001, 0.01, (n, 3)), rng.uniform(0, 1, n), rng.uniform(0, 1, (n, 3)), 7)


def test_scene_roundtrip_exact(tmp_path):
    sc = random_scene(np.random.default_rng(0), 4)
    io.save_scene(tmp_path / "s.json", sc)
    back = io.load_scene(tmp_path / "s.json")
    for k in ("g", "r", "s", "sigma", "c"):
        assert np.array_equal(getattr(back, k), getattr(sc, k))
    assert back.frame_id == 7
    io.save_scene(tmp_path / "e.json", SplatScene.empty())
    assert len(io.load_scene(tmp_path / "e.json")) == 0


def test_malformed_files(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ParseError):
        io.load_scene(tmp_path / "bad.json")
    (tmp_path / "wrong.json").write_text(json.dumps({"splats": [{"g": [0, 0]}]}))
    with pytest.raises(ParseError):
        io.load_scene(tmp_path / "wrong.json")
    (tmp_path / "cam.json").write_text(json.dumps({"fx": 1}))
    with pytest.raises(ParseError):
        io.load_camera(tmp_path / "cam.json")
    with pytest.raises(MissingFrames):
        io.load_observations(tmp_path)


def test_camera_roundtrip(tmp_path):
    cam = CameraView.look_at([0.3, 0.1, 0.4], [0, 0, 0], 50, 60, 32, 34, cx=15.5, cy=16.5)
    io.save_camera(tmp_path / "c.json", cam)
    back = io.load_camera(tmp_path / "c.json")
    assert np.array_equal(back.pose, cam.pose)
    assert (back.fx, back.fy, back.cx, back.cy, back.width, back.height) == (50, 60, 15.5, 16.5, 32, 34)


def test_observation_bundle_roundtrip(tmp_path):
    rig = make_rig(2, CFG, size=12)
    obs = observe(scatter(5, CFG, np.random.default_rng(1)), rig, CFG)
    io.save_observations(tmp_path, obs)
    back = io.load_observations(tmp_path)
    assert len(back) == 2
    for a, b in zip(obs, back):
        assert np.array_equal(b.image.depth, a.image.depth.astype(np.float32).astype(np.float64))
        assert np.abs(b.image.rgb - a.image.rgb).max() <= 0.5 / 255 + 1e-12
        assert np.array_equal(b.view.pose, a.view.pose)


def test_depth_size_checked(tmp_path):
    io.save_depth(tmp_path / "d.bin", np.zeros((3, 4)))
    assert io.load_depth(tmp_path / "d.bin", 4, 3).shape == (3, 4)
    with pytest.raises(ParseError):
        io.load_depth(tmp_path / "d.bin", 5, 3)


def test_action_and_task_roundtrip():
    a = Action(np.array([0.01, -0.02]), np.array([0.05, 0.03]))
    b = io.action_from_json(io.action_to_json(a))
    assert np.array_equal(a.as_vector(), b.as_vector())
    task = random_task("splitting", CFG, np.random.default_rng(2))
    back = io.task_from_json(io.task_to_json(task))
    assert back.kind == task.kind and len(back.target_regions) == len(task.target_regions)
    for r, s in zip(task.target_regions, back.target_regions):
        assert np.array_equal(r.center, s.center) and r.radius == s.radius and r.count == s.count


def test_csv_floats_roundtrip(tmp_path):
    vals = [0.1, 1 / 3, np.float64(2e-17)]
    io.write_csv(tmp_path / "x.csv", ["i", "v"], enumerate(vals))
    rows = io.read_csv(tmp_path / "x.csv")
    assert [float(r["v"]) for r in rows] == [float(v) for v in vals]


# -- config -------------------------------------------------------------------

def test_defaults():
    cfg = RunConfig()
    assert cfg.sim.n_particles == 50 and cfg.sim.n_cameras == 8
    assert cfg.train.hidden == 256 and cfg.train.gamma == 2 and cfg.train.lr == 0.001
    assert cfg.train.omega == 0.1 and cfg.fit.beta == 0.25
    assert (cfg.plan.horizon, cfg.plan.samples, cfg.plan.grad_steps) == (3, 16, 10)
    assert cfg.plan.max_mpc_iters == 30 and cfg.plan.grid == 32


def test_config_roundtrip_and_overrides(tmp_path):
    cfg = RunConfig().with_overrides(["sim.n_particles=20", "plan.biased=true", "train.match=position"])
    assert cfg.sim.n_particles == 20 and cfg.plan.biased is True and cfg.train.match == "position"
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert RunConfig.load(path) == cfg


@pytest.mark.parametrize("doc", [{"bogus": {}}, {"sim": {"n_particle": 3}}, {"plan": {"lr": 1}}])
def test_unknown_keys_rejected(doc):
    with pytest.raises(ParseError):
        RunConfig.from_dict(doc)


@pytest.mark.parametrize("item", ["sim.nope=1", "n_particles=3", "sim.n_particles", "foo.bar=1"])
def test_bad_overrides_rejected(item):
    with pytest.raises(ParseError):
        RunConfig().with_overrides([item])


def test_config_builders():
    cfg = RunConfig().with_overrides(["fit.epochs=7", "sim.n_particles=6"])
    per = cfg.fit.perception(cfg.sim.n_particles, seed=3)
    assert per.n_splats == 12 and per.fit.epochs == 7 and per.seed == 3
    pc = cfg.plan.plan_config(cfg.sim)
    assert pc.query_z == cfg.sim.radius and pc.horizon == 3
    assert cfg.train.train_config(5).seed == 5
