from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailot.convex import (
    COUPLING_SUPPORT,
    MultiMapGraph,
    NotCyclicallyMonotoneError,
    PolyhedralPotential,
    graphical_convergence_diagnostic,
    hausdorff_distance,
    image_of_set,
    inclusion_check,
    potential_from_duals,
    probe_grid,
    rockafellar_potential,
    scale_graph,
    scale_potential,
    subdiff_eval,
)
from tailot.measures import make_discrete
from tailot.transport import dual_potentials, solve_exact


def slopes(arr):
    return sorted(np.asarray(arr).ravel().tolist())


def test_single_piece():
    psi = potential_from_duals([[1.0]], [0.0])
    for x in (-3.0, 0.0, 2.5):
        assert psi([x]) == x
        assert slopes(subdiff_eval(psi, [x])) == [1.0]


def test_two_pieces_hinge():
    psi = potential_from_duals([[0.0], [1.0]], [0.0, 1.0])
    xs = np.linspace(-3, 4, 29).reshape(-1, 1)
    assert np.array_equal(psi(xs), np.maximum(0.0, xs.ravel() - 1))
    assert psi(np.zeros(1)) == max(-0.0, -1.0)
    assert slopes(subdiff_eval(psi, [0.0])) == [0.0]
    assert slopes(subdiff_eval(psi, [1.0])) == [0.0, 1.0]


def test_duplicate_slopes_keep_lower_offset():
    psi = potential_from_duals([[1.0], [1.0], [0.0]], [3.0, 2.0, 0.0])
    assert len(psi.offsets) == 2
    ref = np.maximum.reduce([np.zeros(9), np.arange(9.0) - 3, np.arange(9.0) - 2])
    assert np.array_equal(psi(np.arange(9.0).reshape(-1, 1)), ref)


def test_potential_errors_and_json():
    with pytest.raises(ValueError):
        potential_from_duals(np.empty((0, 1)), [])
    with pytest.raises(ValueError):
        PolyhedralPotential([[1.0], [2.0]], [0.0])
    psi = potential_from_duals([[0.5, -1.0], [2.0, 3.0]], [0.25, -1.0])
    back = PolyhedralPotential.from_json(psi.to_json())
    assert np.array_equal(back.slopes, psi.slopes) and np.array_equal(back.offsets, psi.offsets)


def test_dominated_pieces_flagged():
    psi = PolyhedralPotential([[0.0], [1.0], [0.5]], [0.0, 1.0, 10.0])
    assert psi.dominated(np.linspace(-5, 5, 64).reshape(-1, 1)).tolist() == [False, False, True]


def test_rockafellar_single_pair():
    psi = rockafellar_potential(MultiMapGraph([[0.0]], [[0.0]]))
    assert np.all(psi(np.linspace(-5, 5, 11).reshape(-1, 1)) == 0)


def test_rockafellar_two_pairs():
    g = MultiMapGraph([[0.0], [1.0]], [[0.0], [1.0]])
    psi = rockafellar_potential(g, base_index=0)
    # chains 0 -> x and 0 -> 1 -> x give max(0, x - 1)
    xs = np.linspace(-2, 3, 21).reshape(-1, 1)
    assert np.allclose(psi(xs), np.maximum(0, xs.ravel() - 1))
    assert 0.0 in slopes(subdiff_eval(psi, [0.0]))
    assert {0.0, 1.0} <= set(slopes(subdiff_eval(psi, [1.0])))


def test_rockafellar_positive_cycle():
    g = MultiMapGraph([[0.0], [1.0]], [[1.0], [0.0]])
    with pytest.raises(NotCyclicallyMonotoneError) as info:
        rockafellar_potential(g)
    assert sorted(info.value.cycle) == [0, 1]
    assert info.value.weight == pytest.approx(1.0)


def test_rockafellar_needs_subdifferential_role():
    g = MultiMapGraph([[0.0]], [[0.0]], role=COUPLING_SUPPORT)
    with pytest.raises(ValueError):
        rockafellar_potential(g)


def solver_graph(rng, k, d):
    mu = make_discrete(rng.uniform(-3, 3, (k, d)), np.full(k, 1 / k))
    nu = make_discrete(rng.uniform(-3, 3, (k, d)), np.full(k, 1 / k))
    pi = solve_exact(mu, nu)
    return MultiMapGraph(pi.x, pi.y), (mu, nu, pi)


def test_subgradient_certificate_and_base_value():
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = int(rng.integers(1, 3))
        g, _ = solver_graph(rng, int(rng.integers(2, 9)), d)
        base = int(rng.integers(len(g)))
        psi = rockafellar_potential(g, base)
        assert abs(psi(g.x[base])) <= 1e-12
        z = rng.uniform(-5, 5, (500, d))
        vals = psi(z)
        scale = 1 + np.abs(z).max() * np.abs(g.y).max() * d
        for x, y in zip(g.x, g.y):
            assert np.all(vals >= psi(x) + (z - x) @ y - 1e-9 * scale)


def test_potential_from_duals_matches_solver_argmax():
    rng = np.random.default_rng(9)
    g, (mu, nu, pi) = solver_graph(rng, 6, 2)
    psi = potential_from_duals(nu.points, dual_potentials(mu, nu, pi))
    for x, y in zip(pi.x, pi.y):
        assert any(np.array_equal(y, s) for s in subdiff_eval(psi, x, tol=1e-9))


def test_solver_graphs_are_monotone():
    rng = np.random.default_rng(12)
    for _ in range(20):
        g, _ = solver_graph(rng, int(rng.integers(2, 20)), int(rng.integers(1, 4)))
        assert g.is_monotone()
        assert g.check_cyclic(max_cycle_len=3).ok


def test_minimum_at_origin_when_origin_pair_present():
    rng = np.random.default_rng(6)
    for _ in range(10):
        d = int(rng.integers(1, 3))
        g, _ = solver_graph(rng, 6, d)
        eps = 1e-3
        x = np.vstack([g.x, np.full((1, d), eps / 4)])
        y = np.vstack([g.y, np.full((1, d), -eps / 4)])
        # keep the origin-adjacent pair only if the extended graph stays monotone
        ext = MultiMapGraph(x, y)
        if not ext.check_cyclic(max_cycle_len=4).ok:
            continue
        psi = rockafellar_potential(ext)
        grid = probe_grid(ext.x)
        tol = eps * np.linalg.norm(psi.slopes, axis=1).max()
        assert psi(np.zeros(d)) <= psi(grid).min() + tol


def test_scaling_examples():
    psi = potential_from_duals([[1.0], [-2.0]], [0.5, 1.0])
    same = scale_potential(psi, 1, 1)
    assert np.array_equal(same.slopes, psi.slopes) and np.array_equal(same.offsets, psi.offsets)
    one = scale_potential(potential_from_duals([[3.0, -1.0]], [2.0]), 2.0, 4.0)
    assert one.slopes.tolist() == [[0.75, -0.25]] and one.offsets.tolist() == [0.25]
    g = scale_graph(MultiMapGraph([[2.0]], [[4.0]]), 2, 4)
    assert g.x.tolist() == [[1.0]] and g.y.tolist() == [[1.0]]
    with pytest.raises(ValueError):
        scale_potential(psi, 0, 1)


def test_scaled_quadratic_surrogate():
    # psi ~ x^2 / 2 from tangent lines on a fine grid; scaled version ~ x^2 / 4
    grid = np.linspace(-8, 8, 1601)
    psi = potential_from_duals(grid.reshape(-1, 1), grid ** 2 / 2)
    scaled = scale_potential(psi, 2.0, 4.0)
    h = grid[1] - grid[0]
    for x in np.linspace(-3, 3, 13):
        s = subdiff_eval(scaled, [x])
        assert np.all(np.abs(s - x / 2) <= h / 4 + 1e-12)


def test_scale_commutes_with_sampling():
    rng = np.random.default_rng(1)
    psi = potential_from_duals(rng.normal(size=(15, 2)), rng.normal(size=15))
    xs = rng.uniform(-2, 2, (50, 2))
    g = MultiMapGraph.of_map(lambda x: psi.slopes[psi.active(x)[0]], xs)
    b1, b2 = 0.3, 7.0
    sg = scale_graph(g, b1, b2)
    spsi = scale_potential(psi, b1, b2)
    resampled = np.array([spsi.slopes[spsi.active(x)[0]] for x in sg.x])
    assert np.array_equal(sg.y, resampled)


def test_hausdorff_examples():
    assert hausdorff_distance([[0, 0], [1, 1]], [[1, 1], [0, 0]]) == 0
    assert hausdorff_distance([[0, 0]], [[3, 4]]) == 5
    assert hausdorff_distance([[0], [1]], [[0]]) == 1
    with pytest.raises(ValueError):
        hausdorff_distance(np.empty((0, 1)), [[0]])


def exact_hausdorff(K, L):
    def d2(p, q):
        return sum((Fraction(a) - Fraction(b)) ** 2 for a, b in zip(p, q))

    def directed(A, B):
        return max(min(d2(a, b) for b in B) for a in A)

    return max(directed(K, L), directed(L, K))


point_sets = st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), min_size=1, max_size=7, unique=True)


@settings(max_examples=80, deadline=None)
@given(point_sets, point_sets, point_sets)
def test_hausdorff_metric_properties(K, L, M):
    dKL = hausdorff_distance(K, L)
    # squared distance is exact on integer points
    assert dKL ** 2 == pytest.approx(float(exact_hausdorff(K, L)), rel=1e-12, abs=0)
    assert dKL == hausdorff_distance(L, K)
    assert (dKL == 0) == (set(K) == set(L))
    assert hausdorff_distance(K, M) <= dKL + hausdorff_distance(L, M) + 1e-12


def identity_graph(points):
    pts = np.asarray(points, float).reshape(-1, 1)
    return MultiMapGraph(pts, pts.copy())


def test_image_of_set_examples():
    g = identity_graph([0, 1, 2])
    assert image_of_set(g, [[0.0], [2.0]], 0).ravel().tolist() == [0.0, 2.0]
    assert image_of_set(g, [[1.0]], 1).ravel().tolist() == [0.0, 1.0, 2.0]
    assert len(image_of_set(g, [[0.5]], 0)) == 0


def test_inclusion_check_examples():
    xs = np.linspace(0, 1, 11).reshape(-1, 1)
    limit = MultiMapGraph(xs, xs.copy())
    assert inclusion_check(limit, limit, xs, 0.05) is None
    delta = 0.04
    shifted = MultiMapGraph(xs, xs + delta)
    assert inclusion_check(limit, shifted, xs, 0.05) is None
    far = MultiMapGraph(xs, xs + 0.1)
    w = inclusion_check(limit, far, xs, 0.05)
    assert w is not None and w.distance > 0.05


def test_diagnostic_identical_graphs_bounded_by_lipschitz():
    xs = np.arange(-64, 193).reshape(-1, 1) / 64  # [-1, 3] spacing 1/64
    limit = MultiMapGraph(xs, 2 * xs)  # Lipschitz constant 2
    K = xs[(xs[:, 0] >= 0) & (xs[:, 0] <= 1)]
    eps_grid = [0.5, 0.25, 0.125]
    table = graphical_convergence_diagnostic([limit, limit], limit, K, eps_grid)
    for r in table.rows:
        assert r.hausdorff <= 2 * r.eps + 1e-12
    assert table.spacing == 0


def test_diagnostic_single_pair_graphs():
    g = MultiMapGraph([[1.0]], [[2.0]])
    table = graphical_convergence_diagnostic([g, g], g, [[1.0]], [0.5, 0.1])
    assert all(r.hausdorff == 0 for r in table.rows)
    assert table.pass_eps == {1: 0.1, 2: 0.1}
    assert table.to_csv().splitlines()[0] == "n,eps,hausdorff,pass_eps"


def test_diagnostic_reports_empty_cells():
    g = identity_graph([0.0, 1.0])
    table = graphical_convergence_diagnostic([g], g, [[5.0]], [0.5])
    assert table.rows[0].hausdorff == np.inf and table.rows[0].note == "empty image"


def test_graph_rejects_repeated_pairs():
    with pytest.raises(ValueError):
        MultiMapGraph([[0.0], [0.0]], [[1.0], [1.0]])
    g = MultiMapGraph.from_pairs([[[0.0], [1.0]], [[0.0], [1.0]], [[1.0], [2.0]]])
    assert len(g) == 2
