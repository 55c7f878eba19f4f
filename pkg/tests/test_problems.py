import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covregret.prob import make_rng
from covregret.problems import (
    GenerationFailed,
    GridFlowInstance,
    Infeasible,
    KnapsackInstance,
    LPInstance,
    QPInstance,
    Singular,
    Unbounded,
    build_grid_lp,
    half_capacity_knapsack,
    instance_from_dict,
    instance_to_dict,
    kkt_residuals,
    load_instance,
    random_lp,
    save_instance,
    solve_knapsack,
    solve_lp,
    solve_qp_constrained,
    solve_qp_unconstrained,
)
from oracles import box_qp_1d, grid_paths, knapsack_brute_force, lp_min_by_vertices

SIMPLEX = LPInstance(np.array([[1.0, 1.0]]), np.array([1.0]))

# Share of (n=2, d=4) draws with a bounded region, measured independently by
# scanning the recession cone {r >= 0, A r <= 0} over 20001 directions for
# 4000 draws (0.814); the simplex-based count on a different stream gave 0.815.
BOUNDED_RATE_2x4 = 0.814


# -- LP ------------------------------------------------------------------------

@pytest.mark.parametrize("c, z, obj", [
    ([1.0, 1.0], [0.0, 0.0], 0.0),
    ([-1.0, -2.0], [0.0, 1.0], -2.0),
])
def test_lp_examples(c, z, obj):
    dv = solve_lp(SIMPLEX, c)
    np.testing.assert_allclose(dv.z, z, atol=1e-12)
    assert dv.objective == pytest.approx(obj)
    assert dv.status == "optimal"


def test_lp_tie_is_deterministic():
    runs = [solve_lp(SIMPLEX, [-1.0, -1.0]) for _ in range(5)]
    assert runs[0].objective == pytest.approx(-1.0)
    assert runs[0].status == "tie-broken"
    assert any(np.allclose(runs[0].z, v) for v in ([1, 0], [0, 1]))
    assert all(np.array_equal(r.z, runs[0].z) for r in runs)


def test_lp_construction_errors():
    with pytest.raises(Unbounded):
        LPInstance(np.array([[1.0, -1.0]]), np.array([1.0]))
    with pytest.raises(Infeasible):
        LPInstance(np.array([[1.0]]), np.array([-1.0]))


def test_lp_equalities_and_free_variables():
    # min z0 + z1 with z0 + z1 = 1, |z_i| <= 2, free sign.
    inst = LPInstance(np.vstack([np.eye(2), -np.eye(2)]), np.full(4, 2.0), nonneg=False,
                      A_eq=[[1.0, 1.0]], b_eq=[1.0])
    dv = solve_lp(inst, [1.0, 2.0])
    np.testing.assert_allclose(dv.z, [2.0, -1.0], atol=1e-10)
    assert inst.is_feasible(dv.z)


@pytest.mark.parametrize("n, d", [(2, 2), (3, 4), (4, 3), (5, 6), (6, 6)])
def test_lp_matches_vertex_enumeration(n, d):
    rng = make_rng(100 * n + d)
    for k in range(30):
        inst = random_lp(n, d, seed=int(rng.integers(2**31)))
        c = rng.standard_normal(n)
        best, _ = lp_min_by_vertices(inst.A, inst.b, c)
        dv = solve_lp(inst, c)
        assert dv.objective == pytest.approx(best, abs=1e-8 * (1 + abs(best)))
        assert inst.is_feasible(dv.z)


def test_lp_pointwise_regret_inequality():
    inst = random_lp(6, 4, seed=3)
    rng = make_rng(4)
    mean = rng.standard_normal(6)
    z_mean = inst(mean)
    for c in mean + rng.standard_normal((200, 6)):
        assert c @ inst(c) <= c @ z_mean + 1e-8


def test_lp_piecewise_constant():
    inst = random_lp(6, 4, seed=8)
    rng = make_rng(9)
    same = 0
    trials = 300
    for _ in range(trials):
        c = rng.standard_normal(6)
        dc = rng.standard_normal(6)
        c2 = c + 1e-6 * np.linalg.norm(c) * dc / np.linalg.norm(dc)
        same += np.array_equal(inst(c), inst(c2))
    assert same >= 0.99 * trials


def test_random_lp_properties():
    inst = random_lp(4, 3, seed=12)
    assert inst.is_feasible(np.zeros(4))
    assert np.all(inst.b >= 1.0)
    again = random_lp(4, 3, seed=12)
    np.testing.assert_array_equal(inst.A, again.A)
    np.testing.assert_array_equal(inst.b, again.b)


def test_random_lp_acceptance_rate_2x4():
    rng = make_rng(2024)
    n_draws = 2000
    ok = 0
    for _ in range(n_draws):
        A = rng.standard_normal((4, 2))
        b = np.abs(rng.standard_normal(4)) + 1.0
        try:
            LPInstance(A, b)
            ok += 1
        except Unbounded:
            pass
    se = np.sqrt(BOUNDED_RATE_2x4 * (1 - BOUNDED_RATE_2x4) / n_draws)
    assert abs(ok / n_draws - BOUNDED_RATE_2x4) <= 4 * se


def test_random_lp_gives_up():
    # One constraint on six variables is essentially never bounded.
    with pytest.raises(GenerationFailed):
        random_lp(6, 1, seed=0, max_tries=3)


# -- QP ------------------------------------------------------------------------

@pytest.mark.parametrize("Q, c, z", [
    (np.eye(2), [2.0, -4.0], [-1.0, 2.0]),
    (np.eye(2), [0.0, 0.0], [0.0, 0.0]),
    (np.diag([1.0, 3.0]), [2.0, 8.0], [-1.0, -2.0]),
])
def test_qp_unconstrained_examples(Q, c, z):
    inst = QPInstance(Q, 1.0)
    dv = solve_qp_unconstrained(inst, c)
    np.testing.assert_allclose(dv.z, z, atol=1e-12)
    assert np.linalg.norm(inst.H @ dv.z + np.asarray(c)) <= 1e-10


def test_qp_singular():
    inst = QPInstance(np.zeros((2, 2)), 0.0)
    with pytest.raises(Singular):
        solve_qp_unconstrained(inst, [1.0, 1.0])


def test_qp_rejects_indefinite():
    with pytest.raises(ValueError):
        QPInstance(np.diag([1.0, -1.0]), 0.5)


UNIT_BOX = LPInstance(np.array([[1.0]]), np.array([1.0]))


@pytest.mark.parametrize("c, z", [([2.0], 0.0), ([-1.0], 0.5), ([0.0], 0.0)])
def test_qp_constrained_examples(c, z):
    inst = QPInstance(np.eye(1), 1.0, UNIT_BOX)
    dv = solve_qp_constrained(inst, c)
    assert dv.z[0] == pytest.approx(z, abs=1e-12)
    assert dv.z[0] == pytest.approx(box_qp_1d(1.0, 1.0, c[0], 0.0, 1.0))


def test_qp_inactive_matches_unconstrained():
    rng = make_rng(5)
    Q = np.diag(rng.uniform(1, 2, 4))
    big = LPInstance(np.vstack([np.eye(4), -np.eye(4)]), np.full(8, 1e6), nonneg=False)
    for c in rng.standard_normal((20, 4)):
        np.testing.assert_allclose(QPInstance(Q, 1.0, big)(c), QPInstance(Q, 1.0)(c), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.integers(1, 6))
def test_qp_kkt(seed, d):
    rng = make_rng(seed)
    G = rng.standard_normal((d, d))
    Q = G @ G.T / d
    inst = QPInstance(Q, 0.5, random_lp(d, d + 1, seed=seed))
    c = 3 * rng.standard_normal(d)
    z = solve_qp_constrained(inst, c).z
    res = kkt_residuals(inst, c, z)
    assert max(res.values()) <= 1e-8


def test_qp_affine():
    rng = make_rng(6)
    inst = QPInstance(np.diag([1.0, 2.0, 3.0]), 1.0)
    for _ in range(20):
        c1, c2 = rng.standard_normal((2, 3))
        a = rng.uniform()
        np.testing.assert_allclose(inst(a * c1 + (1 - a) * c2), a * inst(c1) + (1 - a) * inst(c2), atol=1e-9)


def test_qp_batch_matches_single():
    rng = make_rng(7)
    inst = QPInstance(np.diag([1.0, 2.0]), 0.5, LPInstance(np.eye(2), np.ones(2)))
    C = 2 * rng.standard_normal((10, 2))
    np.testing.assert_allclose(inst.batch_decision(C), [inst(c) for c in C])


# -- knapsack ------------------------------------------------------------------

def test_knapsack_example():
    inst = KnapsackInstance([1.0, 2.0, 3.0], 5.0)
    dv = solve_knapsack(inst, [6.0, 10.0, 12.0])
    np.testing.assert_array_equal(dv.z, [0, 1, 1])
    assert dv.objective == pytest.approx(22.0)


def test_knapsack_zero_capacity():
    dv = solve_knapsack(KnapsackInstance([1.0, 2.0], 0.0), [5.0, 5.0])
    np.testing.assert_array_equal(dv.z, [0, 0])
    assert dv.objective == 0.0


def test_knapsack_roomy():
    dv = solve_knapsack(KnapsackInstance([1.0, 2.0, 3.0], 10.0), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(dv.z, [1, 1, 1])


def test_knapsack_skips_negative_values():
    dv = solve_knapsack(KnapsackInstance([1.0, 1.0], 10.0), [3.0, -1.0])
    np.testing.assert_array_equal(dv.z, [1, 0])


def test_knapsack_cost_convention():
    inst = KnapsackInstance([1.0, 2.0, 3.0], 5.0)
    np.testing.assert_array_equal(inst.decision(-np.array([6.0, 10.0, 12.0])), [0, 1, 1])


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.integers(1, 12))
def test_knapsack_brute_force(seed, d):
    rng = make_rng(seed)
    inst = half_capacity_knapsack(d, 10.0, seed)
    v = rng.normal(3.0, 3.0, d)
    dv = solve_knapsack(inst, v)
    assert inst.weights @ dv.z <= inst.capacity + 1e-12
    assert dv.objective == pytest.approx(knapsack_brute_force(v, inst.weights, inst.capacity), abs=1e-9)


def test_half_capacity_constructor():
    inst = half_capacity_knapsack(8, 5.0, 3)
    assert inst.capacity == pytest.approx(inst.weights.sum() / 2)
    assert np.all((inst.weights >= 1) & (inst.weights <= 5))


# -- grid ----------------------------------------------------------------------

@pytest.mark.parametrize("rows, cols", [(2, 2), (3, 3), (4, 4), (3, 5)])
def test_grid_shape(rows, cols):
    g = build_grid_lp(rows, cols)
    assert g.n_edges == rows * (cols - 1) + cols * (rows - 1)
    assert g.n_nodes == rows * cols
    assert g.incidence.shape == (g.n_nodes, g.n_edges)
    assert g.rhs.sum() == 0
    np.testing.assert_array_equal(g.incidence.sum(axis=0), 0)


def test_grid_4x4_matches_benchmark_size():
    g = build_grid_lp(4, 4)
    assert (g.n_edges, g.n_nodes) == (24, 16)


def test_grid_2x2_unit_costs():
    g = build_grid_lp(2, 2)
    z = g(np.ones(4))
    assert z.sum() == pytest.approx(2.0)


def test_grid_integral_paths():
    g = build_grid_lp(3, 3)
    paths = grid_paths(3, 3)
    index = {e: i for i, e in enumerate(g.edges)}
    rng = make_rng(11)
    for c in rng.uniform(0, 1, (50, g.n_edges)):
        z = g(c)
        assert np.all(np.minimum(np.abs(z), np.abs(z - 1)) <= 1e-8)
        best = min(sum(c[index[e]] for e in p) for p in paths)
        assert c @ z == pytest.approx(best, abs=1e-10)


def test_grid_rejects_tiny():
    with pytest.raises(ValueError):
        GridFlowInstance(1, 4)


# -- serialisation -------------------------------------------------------------

@pytest.mark.parametrize("inst", [
    SIMPLEX,
    QPInstance(np.diag([1.0, 2.0]), 0.5),
    QPInstance(np.eye(1), 1.0, UNIT_BOX),
    KnapsackInstance([1.0, 2.0], 1.5),
    GridFlowInstance(3, 3),
], ids=["lp", "qp", "qp-con", "knapsack", "grid"])
def test_instance_round_trip(inst, tmp_path):
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert instance_to_dict(back) == instance_to_dict(inst)
    c = np.linspace(-1, 1, inst.n_vars)
    np.testing.assert_allclose(back(c), inst(c))


def test_unknown_instance_type():
    with pytest.raises(ValueError):
        instance_from_dict({"type": "milp"})
