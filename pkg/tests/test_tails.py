import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailot.convex import MultiMapGraph, potential_from_duals
from tailot.measures import TailScaling, make_discrete, rescale_measure
from tailot.tails import (
    NON_SMOOTH,
    ConfigError,
    InsufficientPairsError,
    TailStudyConfig,
    coupling_homogeneity_residual,
    diagonal_pareto_limit,
    estimate_exponent,
    map_homogeneity_residual,
    monotone_map_1d,
    potential_homogeneity_residual,
    quantize_radial,
    rescale_coupling,
    run_tail_study,
    truncate_to_annulus,
)
from tailot.transport import Coupling, solve_exact


def graph_of(f, xs):
    xs = np.asarray(xs, float).reshape(-1, 1)
    return MultiMapGraph(xs, f(xs))


GEOM = 2.0 ** (np.arange(-16, 33) / 8)  # ratio 2^(1/8): lambda = 2 and 2^(1/2) land on the grid


def test_rescale_coupling_identity():
    mu = make_discrete([[1.0], [2.0]], [0.5, 0.5])
    pi = solve_exact(mu, mu)
    s = TailScaling(1.0, 1.0, lambda t: 1.0, lambda t: 1.0)
    r = rescale_coupling(pi, 1.0, s)
    assert np.array_equal(r.x, pi.x) and np.array_equal(r.mass, pi.mass)


def test_rescale_coupling_example():
    mu = make_discrete([[4.0, 0.0]], [0.01])
    nu = make_discrete([[8.0, 0.0]], [0.01])
    pi = Coupling([0], [0], [0.01], mu, nu)
    s = TailScaling(1.0, 1.0, lambda t: 4.0, lambda t: 8.0)
    r = rescale_coupling(pi, 100.0, s)
    assert r.x.tolist() == [[1.0, 0.0]] and r.y.tolist() == [[1.0, 0.0]]
    assert r.mass[0] == pytest.approx(1.0, rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.floats(1.5, 1000))
def test_rescale_coupling_marginals_exact(k, seed, t):
    rng = np.random.default_rng(seed)
    mu = make_discrete(rng.pareto(1.0, (k, 2)) + 1, rng.uniform(0.1, 1, k))
    w = rng.uniform(0.1, 1, k)
    nu = make_discrete(rng.pareto(2.0, (k, 2)) + 1, w * mu.total_mass / w.sum())
    s = TailScaling.analytic(1.0, 2.0)
    r = rescale_coupling(solve_exact(mu, nu), t, s)
    for got, marg, b in ((r.left, mu, s.b1(t)), (r.right, nu, s.b2(t))):
        ref = rescale_measure(marg, t, b)
        assert np.array_equal(got.points, ref.points) and np.array_equal(got.masses, ref.masses)


def test_truncate_cases():
    g = graph_of(lambda x: x, [0.5, 2.0])
    assert len(truncate_to_annulus(g, 0.1, 10)) == 2
    assert truncate_to_annulus(g, 5, 10).is_empty
    assert truncate_to_annulus(g, 1, 3).x.tolist() == [[2.0]]
    with pytest.raises(ValueError):
        truncate_to_annulus(g, 3, 1)


def test_map_residual_identity_and_square():
    for f, gamma in ((lambda x: x, 1.0), (lambda x: x ** 2, 2.0)):
        g = graph_of(f, GEOM)
        exact, irrational = map_homogeneity_residual(g, [2.0, 2 ** 0.5], gamma, tol_match=1e-9, window=(1, 8))
        assert exact.matched > 0 and exact.p90 == 0
        # sqrt(2) x is rounded, so only agreement to a few ulps is possible
        assert irrational.matched > 0 and irrational.p90 <= 1e-15


def test_map_residual_affine_example():
    g = graph_of(lambda x: x + 1, [1.0, 2.0])
    [s] = map_homogeneity_residual(g, [2.0], 1.0, tol_match=1e-9, window=(0.5, 1.5))
    assert s.matched == 1
    assert s.median == pytest.approx(0.2, rel=1e-15)


def test_map_residual_reports_zero_matches():
    g = graph_of(lambda x: x, [1.0, 1.1])
    [s] = map_homogeneity_residual(g, [10.0], 1.0, tol_match=0.01)
    assert s.matched == 0 and s.unmatched == 2 and np.isnan(s.median)


def test_coupling_residual_lambda_one_exact_and_point_mass():
    rng = np.random.default_rng(0)
    mu = make_discrete(rng.pareto(1, (30, 1)) + 1, np.full(30, 1 / 30))
    pi = solve_exact(mu, make_discrete(rng.pareto(1, (30, 1)) + 1, np.full(30, 1 / 30)))
    s = TailScaling.analytic(1.0, 1.0)
    for row in coupling_homogeneity_residual(pi, [1.0], s, [(1, 2), (2, 4), (0.5, 20)]):
        assert row.residual == 0
    point = Coupling([0], [0], [1.0], make_discrete([[1.5]], [1.0]), make_discrete([[1.5]], [1.0]))
    rows = coupling_homogeneity_residual(point, [1.5, 2.0], s, [(1, 2)])
    assert all(r.residual > 0.4 for r in rows)


def test_coupling_residual_diagonal_limit():
    # exact annulus masses of the limit: pi([a, b]) = 1/a - 1/b for alpha = 1
    pi = diagonal_pareto_limit(1.0, 1000, 0.1, 10.0)
    s = TailScaling.analytic(1.0, 1.0)
    for row in coupling_homogeneity_residual(pi, [1.5, 2.0], s, [(1, 2), (2, 4)]):
        a, b = row.window
        assert row.mass_window == pytest.approx(1 / a - 1 / b, abs=0.01)
        assert row.residual <= 0.02


def test_potential_residual_cases():
    hinge = potential_from_duals([[0.0], [1.0]], [0.0, 1.0])
    [s1] = potential_homogeneity_residual(hinge, [1.0], 2.0, [[2.0], [5.0]])
    assert s1.median == 0
    [s2] = potential_homogeneity_residual(hinge, [2.0], 2.0, [[2.0]])
    assert s2.median == pytest.approx(abs(3 - 4) / (1 + 4))

    gamma = 1.0
    ys = np.linspace(0, 40, 4001)  # slopes y = x^gamma, so psi ~ x^2 / 2
    xs = ys ** (1 / gamma)
    offsets = xs * ys - xs ** (gamma + 1) / (gamma + 1)
    psi = potential_from_duals(ys.reshape(-1, 1), offsets)
    probes = np.linspace(1, 4, 31).reshape(-1, 1)
    h = ys[1] - ys[0]
    for s in potential_homogeneity_residual(psi, [1.5, 2.0], gamma + 1, probes):
        assert s.p90 <= h ** 2  # tangent-line envelope error is O(h^2)


def test_estimate_exponent_exact_graphs():
    assert estimate_exponent(graph_of(lambda x: x, GEOM)).gamma_hat == pytest.approx(1.0, abs=1e-12)
    est = estimate_exponent(graph_of(lambda x: x ** 2, GEOM[GEOM > 0]))
    assert est.gamma_hat == pytest.approx(2.0, abs=1e-12)
    assert est.n_pairs == len(GEOM)


def test_estimate_exponent_noise_is_not_accepted():
    rng = np.random.default_rng(0)
    xs = GEOM.reshape(-1, 1)
    ys = rng.permutation(xs ** 2)
    est = estimate_exponent(MultiMapGraph(xs, ys))
    assert abs(est.gamma_hat - 2.0) > 3 * est.stderr


def test_estimate_exponent_within_three_stderr_on_oracle_graphs():
    hits = 0
    for seed in range(40):
        rng = np.random.default_rng(seed)
        xs = np.sort(rng.uniform(1, 4, 60)).reshape(-1, 1)
        ys = xs ** 2 * np.exp(rng.normal(0, 0.05, xs.shape))
        est = estimate_exponent(MultiMapGraph(xs, ys))
        hits += abs(est.gamma_hat - 2.0) <= 3 * est.stderr
    assert hits >= 38  # about 99.7% expected


def test_estimate_exponent_insufficient_pairs():
    with pytest.raises(InsufficientPairsError):
        estimate_exponent(graph_of(lambda x: x, GEOM[:10]))


def test_monotone_map_1d_oracle():
    same = monotone_map_1d(1.5, 1.5)
    xs = np.geomspace(1, 100, 50)
    assert np.allclose(same(xs), xs, rtol=1e-12)
    sq = monotone_map_1d(2.0, 1.0)
    assert np.allclose(sq(xs), xs ** 2, rtol=1e-12)
    assert np.allclose(sq.quantile_target(sq.cdf_source(xs)), xs ** 2, rtol=1e-9)
    assert np.allclose(sq.limit(xs), xs ** 2)
    for t in (10.0, 1e3, 1e6):
        z = np.geomspace(1.0, 50.0, 20)
        assert np.allclose(sq.rescaled(t)(z), z ** 2, rtol=1e-12)
    with pytest.raises(ValueError):
        monotone_map_1d(0, 1)


def test_quantize_keeps_tail_and_mass():
    from tailot.measures import sample_regularly_varying

    mu = sample_regularly_varying(1.0, "uniform-on-sphere", 5000, seed=1, dim=2)
    q = quantize_radial(mu, 400, seed=3)
    assert len(q) == 400
    assert q.total_mass == pytest.approx(1.0, rel=1e-12)
    top = np.sort(mu.radii)[-200:]
    assert np.array_equal(np.sort(q.radii)[-200:], top)
    assert quantize_radial(mu, 400, seed=3) == q


def test_config_validation():
    base = dict(alpha1=1, alpha2=1, n=1000, k=100, t_grid=[10, 50])
    TailStudyConfig.from_dict(base)
    with pytest.raises(ConfigError, match="n/10"):
        TailStudyConfig.from_dict(base | {"t_grid": [10, 200]})
    with pytest.raises(ConfigError, match="unknown"):
        TailStudyConfig.from_dict(base | {"colour": "red"}, strict=True)
    TailStudyConfig.from_dict(base | {"colour": "red"})
    with pytest.raises(ConfigError, match="schema"):
        TailStudyConfig.from_dict(base | {"schema": 2})
    with pytest.raises(ConfigError, match="missing"):
        TailStudyConfig.from_dict({"alpha1": 1})
    with pytest.raises(ConfigError):
        TailStudyConfig.from_dict(base | {"windows": [[2, 1]]})
    with pytest.raises(ConfigError):
        TailStudyConfig.from_dict(base | {"k": 2000})


def small_config(**kw):
    base = dict(alpha1=1.0, alpha2=1.0, n=4000, k=500, t_grid=(10.0, 50.0), seed=3)
    return TailStudyConfig(**(base | kw))


def test_study_identity_case():
    res = run_tail_study(small_config())
    assert res.cost == 0
    g = res.final.graph
    assert np.array_equal(g.x, g.y)
    [(_, est, status)] = res.exponents
    assert status == "ok" and est.gamma_hat == pytest.approx(1.0, abs=1e-12)
    assert res.t_grid == [10.0, 50.0]
    for _, s in res.final.map_rows:
        assert s.median <= 0.1


def test_study_cross_exponent_case():
    res = run_tail_study(small_config(alpha1=2.0, alpha2=1.0))
    [(_, n, med, _)] = res.final.oracle_rows
    assert n > 20 and med <= 0.15
    [(_, est, _)] = res.exponents
    assert 1.8 <= est.gamma_hat <= 2.2


def test_study_two_dimensional_radial():
    res = run_tail_study(small_config(alpha1=2.0, alpha2=1.0, dim=2, n=3000, k=400, t_grid=(20.0, 60.0)))
    g = res.final.graph
    cos = np.einsum("kd,kd->k", g.x, g.y) / (np.linalg.norm(g.x, axis=1) * np.linalg.norm(g.y, axis=1))
    assert np.median(cos) > 0.99  # directions preserved
    [(_, est, _)] = res.exponents
    assert abs(est.gamma_hat - 2.0) <= 0.2


def test_study_labels_non_smooth_regime():
    cfg = small_config(angular="fixed-direction", dim=2, n=1000, k=100, t_grid=(10.0,))
    assert run_tail_study(cfg).regime == NON_SMOOTH
    assert small_config().regime != NON_SMOOTH


def test_study_empirical_b_mode_recorded():
    res = run_tail_study(small_config(b_mode="empirical", n=2000, k=200))
    assert res.b_mode == "empirical"


def test_study_deterministic_across_threads():
    cfg = small_config(n=2000, k=300, t_grid=(5.0, 10.0, 20.0, 50.0))
    a = run_tail_study(cfg, threads=1).tables()
    b = run_tail_study(cfg, threads=4).tables()
    assert a == b


def test_empirical_deviation_shrinks_with_n():
    """Independent samples: distance of the t = 10 graph from the analytic
    limit map shrinks as n grows (averaged over seeds)."""
    def deviation(n, k):
        out = []
        for seed in range(3):
            cfg = TailStudyConfig(alpha1=2.0, alpha2=1.0, n=n, k=k, t_grid=(10.0,), windows=((1.0, 4.0),),
                                  seed=100 + seed, pairing="independent")
            [(_, _, med, _)] = run_tail_study(cfg).final.oracle_rows
            out.append(med)
        return float(np.mean(out))

    small, large = deviation(1000, 1000), deviation(10_000, 1000)
    assert large < small
