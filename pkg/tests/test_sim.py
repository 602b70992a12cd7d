import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsmpc.errors import AlreadySolved, EmptySet, InvalidAction
from gsmpc.sim import (Action, ActionLimits, ParticleState, Region, SimConfig, TaskSpec, gen_dataset,
                       make_rig, observe, oracle_policy, random_task, scatter, state_error, step,
                       success, target_state)
from gsmpc.splat_core import CameraView

CFG = SimConfig(n_particles=10)
R = CFG.radius
LIMITS = ActionLimits(CFG.workspace, CFG.min_push, CFG.max_push)


def state(xy):
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    return ParticleState(np.column_stack([xy, np.full(len(xy), R)]), R, CFG.workspace)


def push(xs, ys, xe, ye):
    return Action(np.array([xs, ys]), np.array([xe, ye]))


# -- step ----------------------------------------------------------------------

def test_push_far_away_leaves_state_unchanged():
    s = state([[0.05, 0.05], [0.08, 0.06]])
    out = step(s, push(-0.1, -0.1, -0.1, -0.05))
    assert np.array_equal(out.positions, s.positions)


def test_single_particle_on_push_line():
    s = state([[0.0, 0.0]])
    out = step(s, push(-0.05, 0.0, 0.05, 0.0))
    np.testing.assert_allclose(out.xy[0], [0.05 + R, 0.0], atol=1e-12)


def test_two_touching_particles_head_on():
    s = state([[0.0, 0.0], [2 * R, 0.0]])
    out = step(s, push(-0.03, 0.0, 0.03, 0.0))
    assert np.all(out.xy[:, 0] > s.xy[:, 0])
    assert np.linalg.norm(out.xy[0] - out.xy[1]) >= 2 * R - 1e-5
    np.testing.assert_allclose(out.xy[0, 0], 0.03 + R, atol=1e-5)


def test_invalid_action_rejected():
    s = state([[0.0, 0.0]])
    with pytest.raises(InvalidAction):
        step(s, push(0, 0, 0.001, 0))          # too short
    with pytest.raises(InvalidAction):
        step(s, push(0, 0, 0.5, 0))            # leaves the workspace


def _random_action(rng):
    u = rng.uniform(-0.12, 0.12, 4)
    return Action.from_vector(LIMITS.project(u))


def _swept_hits(xy, action, pusher_len):
    """Particles whose disk meets the swept pusher rectangle."""
    d = action.end - action.start
    n = d / np.linalg.norm(d)
    t = np.array([-n[1], n[0]])
    rel = xy - action.start
    a, b = rel @ n, rel @ t
    length = np.linalg.norm(d)
    ca = np.clip(a, 0, length)
    cb = np.clip(b, -pusher_len / 2, pusher_len / 2)
    return np.hypot(a - ca, b - cb) < R


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_step_properties(seed):
    rng = np.random.default_rng(seed)
    s = scatter(12, CFG, rng)
    act = _random_action(rng)
    out = step(s, act, CFG.pusher_len, LIMITS)
    # count conserved, separation and workspace invariants
    assert len(out) == len(s)
    d = np.linalg.norm(out.xy[:, None] - out.xy[None], axis=-1) + np.eye(len(out))
    assert d.min() >= 2 * R - 1e-5
    assert np.all(np.abs(out.xy) <= CFG.half_extent - R + 1e-12)
    # a push that touches nobody moves nobody
    if not _swept_hits(s.xy, act, CFG.pusher_len).any():
        assert np.array_equal(out.xy, s.xy)
    # displacement bounded by the push length plus a full contact chain
    moved = np.linalg.norm(out.xy - s.xy, axis=1)
    assert moved.max() <= act.length + 2 * R * len(s) + 1e-9


def test_step_deterministic():
    rng = np.random.default_rng(1)
    s = scatter(15, CFG, rng)
    act = _random_action(rng)
    assert np.array_equal(step(s, act).positions, step(s, act).positions)


def test_action_projection_is_valid():
    rng = np.random.default_rng(2)
    for _ in range(200):
        u = rng.uniform(-0.3, 0.3, 4)
        assert LIMITS.is_valid(Action.from_vector(LIMITS.project(u)))


# -- observe -------------------------------------------------------------------

def test_observe_empty_state_is_background():
    rig = make_rig(2, CFG, size=16)
    for o in observe(state(np.zeros((0, 2))), rig, CFG):
        hit = o.image.depth > 0
        assert np.all(o.image.rgb[hit] == CFG.background_color)


def test_observe_disk_size_top_down():
    f, height = 200.0, 0.5
    cam = CameraView.look_at([0, 0, height], [0, 0, 0], f, f, 41, 41, up=(0, 1, 0))
    o = observe(state([[0.0, 0.0]]), [cam], CFG)[0]
    mask = np.all(o.image.rgb == CFG.particle_color, axis=-1)
    depth = height - R
    diam = int(np.ceil(2 * R * f / depth))
    assert abs(mask.any(0).sum() - diam) <= 1 and abs(mask.any(1).sum() - diam) <= 1
    v, u = np.nonzero(mask)
    assert abs(u.mean() - 20) < 0.5 and abs(v.mean() - 20) < 0.5


def test_observe_particles_distinct_in_every_view():
    rng = np.random.default_rng(3)
    s = scatter(10, CFG, rng)
    for o in observe(s, make_rig(8, CFG), CFG):
        assert np.any(np.all(o.image.rgb == CFG.particle_color, axis=-1))
    assert not np.allclose(CFG.particle_color, CFG.background_color)


# -- tasks -----------------------------------------------------------------------

DISK = TaskSpec("collecting", [Region([0.0, 0.0], 0.03)])


def test_success_examples():
    assert success(state([[0, 0], [0.011, 0]]), DISK)
    assert not success(state([[0, 0], [0.1, 0.1]]), DISK)
    assert success(state(np.zeros((0, 2))), DISK)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_success_monotone(seed):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-0.1, 0.1, (6, 2))
    before = success(state(xy), DISK)
    outside = np.nonzero(np.linalg.norm(xy, axis=1) > 0.035)[0]
    if len(outside) == 0:
        return
    i = outside[0]
    moved = xy.copy()
    moved[i] = rng.uniform(-0.01, 0.01, 2)
    assert success(state(moved), DISK) >= before


def test_state_error_examples():
    a = state([[0, 0], [0.05, 0.02], [0.01, -0.03]])
    assert state_error(a, a) == 0.0
    d = 0.03
    assert state_error(state([[0, 0]]), state([[d, 0]])) == pytest.approx(2 * d * d, rel=1e-12)
    perm = state(a.xy[[2, 0, 1]])
    assert state_error(a, perm) == state_error(a, a)
    with pytest.raises(EmptySet):
        state_error(state(np.zeros((0, 2))), a)


def test_oracle_single_particle_collinear():
    s = state([[0.08, 0.06]])
    act = oracle_policy(s, DISK, np.random.default_rng(0), LIMITS, angle_noise=0.0, pos_noise=0.0)
    to_goal = -s.xy[0] / np.linalg.norm(s.xy[0])
    dirn = (act.end - act.start) / act.length
    np.testing.assert_allclose(dirn, to_goal, atol=1e-9)
    off = act.start - s.xy[0]
    cross = to_goal[0] * off[1] - to_goal[1] * off[0]
    assert abs(cross) < 1e-9


def test_oracle_already_solved_and_deterministic():
    with pytest.raises(AlreadySolved):
        oracle_policy(state([[0, 0]]), DISK, np.random.default_rng(0))
    s = scatter(10, CFG, np.random.default_rng(4))
    a = oracle_policy(s, DISK, np.random.default_rng(5), LIMITS)
    b = oracle_policy(s, DISK, np.random.default_rng(5), LIMITS)
    assert np.array_equal(a.as_vector(), b.as_vector())


def test_oracle_solves_collecting():
    rng = np.random.default_rng(6)
    s = scatter(10, CFG, rng)
    task = random_task("collecting", CFG, rng, radius=0.06)
    for _ in range(40):
        if success(s, task):
            break
        s = step(s, oracle_policy(s, task, rng, LIMITS), CFG.pusher_len, LIMITS)
    assert success(s, task)


@pytest.mark.parametrize("kind", ["collecting", "splitting", "redistributing"])
def test_target_state_solves_task(kind):
    task = random_task(kind, CFG, np.random.default_rng(7))
    goal = target_state(task, 10, CFG)
    assert len(goal) == 10 and success(goal, task)
    d = np.linalg.norm(goal.xy[:, None] - goal.xy[None], axis=-1) + np.eye(10)
    assert d.min() >= 2 * R


# -- datasets ----------------------------------------------------------------------

def test_gen_dataset_deterministic():
    rig = make_rig(2, CFG, size=16)
    a = gen_dataset(2, 3, rig=rig, seed=11, config=CFG)
    b = gen_dataset(2, 3, rig=rig, seed=11, config=CFG)
    assert len(a) == 2
    for ta, tb in zip(a, b):
        assert len(ta.states) == 4
        for sa, sb in zip(ta.states, tb.states):
            assert sa.positions.tobytes() == sb.positions.tobytes()
        for ua, ub in zip(ta.actions, tb.actions):
            assert ua.as_vector().tobytes() == ub.as_vector().tobytes()
        oa, ob = ta.observations(1), tb.observations(1)
        assert all(x.image.rgb.tobytes() == y.image.rgb.tobytes() for x, y in zip(oa, ob))


def test_gen_dataset_zero_steps():
    trajs = gen_dataset(2, 0, rig=make_rig(1, CFG, size=8), seed=0, config=CFG)
    assert all(len(t.states) == 1 and len(t.actions) == 0 for t in trajs)
    assert len(list(trajs[0].transitions())) == 0


def test_default_scale():
    cfg = SimConfig()
    assert cfg.n_particles == 50 and len(make_rig(config=cfg)) == 8
