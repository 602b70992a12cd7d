import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from gsmpc.dynamics import DynamicsModel, radius_edges
from gsmpc.errors import EmptyQuerySet, EmptyScene
from gsmpc.planner import PlanConfig, cost, mpc_execute, plan, rollout_batch, sample_actions
from gsmpc.scene_init import PerceptionConfig
from gsmpc.sim import Action, ActionLimits, ParticleState, Region, SimConfig, TaskSpec, make_rig
from gsmpc.splat_core import FitConfig, SplatScene, normalize_quat

from oracles import central_difference, density_bruteforce, rel_error

CFG = SimConfig(n_particles=5)
LIMITS = ActionLimits(CFG.workspace, CFG.min_push, CFG.max_push)


def random_scene(rng, n, spread=0.05, scale=(0.01, 0.02)):
    g = np.column_stack([rng.uniform(-spread, spread, (n, 2)), np.full(n, CFG.radius)])
    return SplatScene(g, normalize_quat(rng.normal(size=(n, 4))), rng.uniform(*scale, (n, 3)),
                      rng.uniform(0.5, 1, n), rng.uniform(0, 1, (n, 3)))


def perturbed_model(seed=0, hidden=32, gamma=2):
    m = DynamicsModel(hidden=hidden, gamma=gamma, seed=seed)
    gen = torch.Generator().manual_seed(seed + 1)
    with torch.no_grad():
        for p in m.dec.parameters():
            p.uniform_(-0.1, 0.1, generator=gen)
    return m


POINTS = CFG.workspace.grid(8, 8, CFG.radius)


# -- cost ----------------------------------------------------------------------

def test_cost_examples():
    rng = np.random.default_rng(0)
    sc = random_scene(rng, 4)
    assert float(cost(sc, sc, POINTS)) == 0.0
    assert float(cost(SplatScene.empty(), SplatScene.empty(), POINTS)) == 0.0
    other = random_scene(rng, 3)
    x = np.array([[0.01, -0.02, 0.004]])
    a = density_bruteforce(sc.g, sc.r, sc.s, sc.sigma, x[0])
    b = density_bruteforce(other.g, other.r, other.s, other.sigma, x[0])
    assert float(cost(sc, other, x)) == pytest.approx((a - b) ** 2, rel=1e-10)
    with pytest.raises(EmptyQuerySet):
        cost(sc, other, np.zeros((0, 3)))


def test_cost_matches_bruteforce_mean():
    rng = np.random.default_rng(1)
    a, b = random_scene(rng, 3), random_scene(rng, 4)
    pts = rng.uniform(-0.06, 0.06, (7, 3))
    want = np.mean([(density_bruteforce(a.g, a.r, a.s, a.sigma, x)
                     - density_bruteforce(b.g, b.r, b.s, b.sigma, x)) ** 2 for x in pts])
    assert float(cost(a, b, pts)) == pytest.approx(want, rel=1e-10)


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_cost_order_invariant(seed):
    rng = np.random.default_rng(seed)
    a, b = random_scene(rng, 5), random_scene(rng, 4)
    base = float(cost(a, b, POINTS))
    shuffled = float(cost(a.subset(rng.permutation(5)), b.subset(rng.permutation(4)), POINTS))
    assert shuffled == pytest.approx(base, rel=1e-12, abs=1e-18)


# -- sampling and rollout --------------------------------------------------------

@pytest.mark.parametrize("biased", [False, True])
def test_sampled_actions_valid_and_seeded(biased):
    rng = np.random.default_rng(2)
    sc, tgt = random_scene(rng, 5), random_scene(rng, 5)
    u = sample_actions(np.random.default_rng(3), 6, 2, LIMITS, sc, tgt, biased)
    assert u.shape == (6, 2, 4)
    assert np.array_equal(u, sample_actions(np.random.default_rng(3), 6, 2, LIMITS, sc, tgt, biased))
    assert all(LIMITS.is_valid(Action.from_vector(v)) for v in u.reshape(-1, 4))


def test_planning_cost_gradient_matches_finite_difference():
    rng = np.random.default_rng(4)
    model = perturbed_model()
    sc, tgt = random_scene(rng, 5), random_scene(rng, 5)
    edges = radius_edges(sc.g, 0.1)
    u0 = sample_actions(rng, 1, 1, LIMITS)

    def f(u):
        with torch.no_grad():
            return float(cost(rollout_batch(model, sc, torch.tensor(u), edges), tgt, POINTS)[0])

    ut = torch.tensor(u0, requires_grad=True)
    cost(rollout_batch(model, sc, ut, edges), tgt, POINTS)[0].backward()
    assert rel_error(ut.grad.numpy(), central_difference(f, u0, 1e-6)) < 1e-3


# -- plan --------------------------------------------------------------------------

def _instance(seed):
    rng = np.random.default_rng(seed)
    return random_scene(rng, 5), random_scene(rng, 5)


def test_plan_lr_zero_is_best_of_k():
    sc, tgt = _instance(5)
    model = perturbed_model()
    cfg = PlanConfig(horizon=1, samples=8, grad_steps=1, action_lr=0.0, grid=8)
    res = plan(sc, tgt, model, cfg, seed=9, limits=LIMITS)
    np.testing.assert_array_equal(res.costs, res.initial_costs)
    assert res.k_opt == int(np.argmin(res.initial_costs))
    u = sample_actions(np.random.default_rng(9), 8, 1, LIMITS)
    np.testing.assert_array_equal(res.actions[0].as_vector(), u[res.k_opt, 0])


@given(st.integers(0, 1000))
@settings(max_examples=8, deadline=None)
def test_plan_descent_properties(seed):
    sc, tgt = _instance(seed)
    model = perturbed_model(seed % 3)
    cfg = PlanConfig(horizon=2, samples=4, grad_steps=4, action_lr=0.05, grid=8)
    res = plan(sc, tgt, model, cfg, seed=seed, limits=LIMITS)
    assert res.cost <= res.initial_costs.min()
    assert np.all(res.costs <= res.initial_costs)
    assert np.all(np.diff(res.history, axis=0) <= 0)
    assert res.k_opt == int(np.argmin(res.costs))
    assert len(res.actions) == 2


def test_plan_deterministic_and_json():
    sc, tgt = _instance(6)
    model = perturbed_model()
    cfg = PlanConfig(horizon=2, samples=4, grad_steps=3, grid=8)
    a = plan(sc, tgt, model, cfg, seed=1, limits=LIMITS)
    b = plan(sc, tgt, model, cfg, seed=1, limits=LIMITS)
    assert a.costs.tobytes() == b.costs.tobytes()
    assert a.to_json(1) == b.to_json(1)
    js = a.to_json(1)
    assert set(js) == {"actions", "costs", "k_opt", "seed"}
    assert len(js["costs"]) == 4 and len(js["actions"]) == 2


def test_plan_target_equals_scene_identity_model():
    sc, _ = _instance(7)
    res = plan(sc, sc, DynamicsModel(hidden=16), PlanConfig(horizon=1, samples=4, grad_steps=2, grid=8),
               seed=0, limits=LIMITS)
    assert res.cost == pytest.approx(0.0, abs=1e-20)


def test_plan_config_and_empty_scene():
    with pytest.raises(ValueError):
        PlanConfig(horizon=0)
    with pytest.raises(EmptyQuerySet):
        PlanConfig(grid=0)
    sc, _ = _instance(8)
    with pytest.raises(EmptyScene):
        plan(SplatScene.empty(), sc, DynamicsModel(hidden=8), PlanConfig(grid=4), 0, LIMITS)


# -- mpc_execute ---------------------------------------------------------------------

FAST = PerceptionConfig(fit=FitConfig(epochs=2))


def _scatter_state(xy):
    xy = np.asarray(xy, dtype=float)
    return ParticleState(np.column_stack([xy, np.full(len(xy), CFG.radius)]), CFG.radius, CFG.workspace)


def test_mpc_zero_iters_and_already_solved():
    task = TaskSpec("collecting", [Region([0.0, 0.0], 0.05)])
    rig = make_rig(2, CFG, size=16)
    far = _scatter_state([[0.09, 0.09], [-0.09, 0.09]])
    model = DynamicsModel(hidden=8)
    ep = mpc_execute(far, task, SplatScene.empty(), model, PlanConfig(max_mpc_iters=0, grid=4), rig, 0,
                     CFG, FAST)
    assert len(ep) == 0 and np.array_equal(ep.final_state.positions, far.positions)
    solved = _scatter_state([[0.0, 0.0], [0.012, 0.0]])
    ep = mpc_execute(solved, task, SplatScene.empty(), model, PlanConfig(grid=4), rig, 0, CFG, FAST)
    assert len(ep) == 0 and ep.solved


def test_mpc_log_length_bounded_and_deterministic():
    task = TaskSpec("collecting", [Region([0.0, 0.0], 0.03)])
    rig = make_rig(2, CFG, size=16)
    far = _scatter_state([[0.09, 0.09], [-0.09, 0.09]])
    cfg = PlanConfig(horizon=1, samples=2, grad_steps=1, max_mpc_iters=2, grid=4)
    tgt = random_scene(np.random.default_rng(0), 3)
    runs = [mpc_execute(far, task, tgt, perturbed_model(hidden=8), cfg, rig, 3, CFG, FAST)
            for _ in range(2)]
    assert len(runs[0]) <= 2
    assert [s.chamfer for s in runs[0].steps] == [s.chamfer for s in runs[1].steps]
    assert all(s.render is not None and s.render.shape == (16, 16, 3) for s in runs[0].steps)
