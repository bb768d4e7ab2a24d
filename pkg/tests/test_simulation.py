import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orbitforge.automorphism import canonical_rotation
from orbitforge.graph import DirectedGraph, incidence_matrix
from orbitforge.simulation import (
    NetworkParams,
    SimulationConfig,
    SimulationError,
    SolverError,
    check_invariance,
    controller_map,
    detect_clusters,
    sample_params,
    simulate,
    steady_state_solve,
    vector_field,
)
from orbitforge.synthesis import ClusterSpec, build_os_graph

EDGE = DirectedGraph(2, ((0, 1),))


def bisect(f, lo, hi, tol=1e-14):
    flo = f(lo)
    assert flo * f(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (f(mid) < 0) == (flo < 0):
            lo, flo = mid, f(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_params_validation():
    with pytest.raises(ValueError):
        NetworkParams(0.5, 1.0, 0.0)
    with pytest.raises(ValueError):
        NetworkParams(float("nan"), 1.0, 1.0)
    p = NetworkParams(0.5, -2.0, 2.0)
    assert p.gamma0 == 0.0 and not p.clustering_regime()
    assert NetworkParams(0.5, 1.0, 2.0).clustering_regime()


def test_config_validation():
    for kwargs in [dict(dt=0), dict(t_max=1e-4), dict(steady_tol=0), dict(cluster_tol=-1)]:
        with pytest.raises(ValueError):
            SimulationConfig(**kwargs)


def test_controller_map_examples():
    p = NetworkParams(0.3, 1.5, 2.0)
    assert controller_map(0.0, p) == pytest.approx(3.5)
    q = NetworkParams(0.3, 0.0, 1.0)
    assert controller_map(math.pi / 2, q) == pytest.approx(math.pi / 2)


def test_controller_map_monotone():
    rng = np.random.default_rng(0)
    for seed in range(5):
        p = sample_params(seed)
        z1 = rng.uniform(-50, 50, 2000)
        z2 = z1 + rng.uniform(0, 10, 2000)
        assert np.all(controller_map(z2, p) >= controller_map(z1, p) - 1e-12)


def test_vector_field_isolated_agent():
    g = DirectedGraph(1)
    assert vector_field([0.0], g, NetworkParams(0.7, 1.0, 1.0)).tolist() == [0.7]


def test_vector_field_consensus_not_equilibrium():
    p = NetworkParams(0.4, 1.0, 2.0)
    c = 1.3
    dx = vector_field([c, c], EDGE, p)
    mu0 = p.a1 + p.a2
    assert dx == pytest.approx([-c - mu0 + p.alpha, -c + mu0 + p.alpha])


def test_vector_field_dimension_check():
    with pytest.raises(ValueError):
        vector_field([0.0], EDGE, NetworkParams(0.1, 1.0, 1.0))


@given(st.integers(0, 10_000))
def test_vector_field_sum_rule(seed):
    rng = np.random.default_rng(seed)
    spec = ClusterSpec(tuple(int(r) for r in rng.integers(1, 5, rng.integers(1, 5))))
    g = build_os_graph(spec)
    p = sample_params(seed)
    x = rng.normal(0, 5, g.n)
    dx = vector_field(x, g, p)
    assert dx.sum() == pytest.approx(-x.sum() + g.n * p.alpha, abs=1e-9 * (1 + np.abs(dx).sum()))


def test_vector_field_matches_dense_formula():
    g = build_os_graph(ClusterSpec((2, 3)))
    p = NetworkParams(0.2, -1.0, 3.0)
    x = np.linspace(-1, 2, g.n)
    E = incidence_matrix(g)
    zeta = E.T @ x
    expected = -x - E @ (p.a1 + p.a2 * (zeta + np.cos(zeta))) + p.alpha
    assert np.allclose(vector_field(x, g, p), expected)


def test_simulate_isolated_agent():
    res = simulate(DirectedGraph(1), NetworkParams(0.5, 1.0, 1.0), SimulationConfig(x0=(0.0,)))
    assert res.converged
    assert res.steady_state[0] == pytest.approx(0.5, abs=1e-7)
    assert res.detected_partition == [[0]]
    assert res.times[0] == 0.0 and res.states.shape == (len(res.times), 1)


def test_simulate_refuses_consensus_regime_by_default():
    g = build_os_graph(ClusterSpec((2, 2)))
    with pytest.raises(ValueError):
        simulate(g, NetworkParams(0.5, -1.0, 1.0))
    res = simulate(g, NetworkParams(0.5, -1.0, 1.0), allow_consensus=True)
    assert res.converged and len(res.detected_partition) == 1


def test_simulate_reports_divergence():
    g = DirectedGraph(1)
    with pytest.raises(SimulationError):
        simulate(g, NetworkParams(0.5, 1.0, 1.0), SimulationConfig(x0=(1e308,), dt=1.0, t_max=10.0))


def test_simulate_not_converged_flag():
    g = build_os_graph(ClusterSpec((3, 3)))
    res = simulate(g, sample_params(3), SimulationConfig(t_max=0.5, seed=3))
    assert not res.converged and res.steady_state is None
    assert res.times[-1] == pytest.approx(0.5)


def test_simulate_bit_reproducible():
    g = build_os_graph(ClusterSpec((1, 2, 3)))
    p = sample_params(11)
    a = simulate(g, p, SimulationConfig(seed=11))
    b = simulate(g, p, SimulationConfig(seed=11))
    assert np.array_equal(a.states, b.states)


def test_newton_isolated_agent():
    y = steady_state_solve(DirectedGraph(1), NetworkParams(0.35, 1.0, 1.0))
    assert y[0] == 0.35


def test_newton_two_agents_against_bisection():
    p = NetworkParams(0.0, 0.0, 1.0)
    # zeta = y0 - y1 solves zeta + 2 (zeta + cos zeta) = 0
    zeta = bisect(lambda z: z + 2.0 * (z + math.cos(z)), -5.0, 5.0)
    y = steady_state_solve(EDGE, p)
    assert y == pytest.approx([zeta / 2, -zeta / 2], abs=1e-10)


def test_newton_failure_raises():
    g = build_os_graph(ClusterSpec((2, 3)))
    with pytest.raises(SolverError):
        steady_state_solve(g, sample_params(0), max_iter=0)


@pytest.mark.parametrize("seed", range(12))
def test_newton_agrees_with_ode(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    spec = ClusterSpec(tuple(int(r) for r in rng.integers(1, 6, k)))
    g = build_os_graph(spec, tuple(rng.permutation(k)))
    p = sample_params(seed)
    res = simulate(g, p, SimulationConfig(seed=seed))
    assert res.converged
    assert np.max(np.abs(vector_field(res.final_state, g, p))) < 1e-8
    y = steady_state_solve(g, p)
    assert np.max(np.abs(y - res.final_state)) < 1e-6
    assert check_invariance(y, canonical_rotation(spec), 1e-9)


def test_detect_clusters_examples():
    assert detect_clusters([1.0, 1.0, 5.0], 0.01) == [[0, 1], [2]]
    assert detect_clusters([2.0] * 4, 1e-3) == [[0, 1, 2, 3]]
    assert detect_clusters([3.0, 1.0, 3.0005, 1.0002], 1e-3) == [[0, 2], [1, 3]]
    assert detect_clusters([], 1.0) == []
    with pytest.raises(ValueError):
        detect_clusters([1.0, float("nan")], 1.0)


@given(st.lists(st.floats(-1e3, 1e3), max_size=30), st.floats(1e-6, 10))
def test_detect_clusters_partition(values, tol):
    groups = detect_clusters(values, tol)
    flat = sorted(i for g in groups for i in g)
    assert flat == list(range(len(values)))
    ordered = sorted(groups, key=lambda g: min(values[i] for i in g))
    for a, b in zip(ordered, ordered[1:]):
        assert min(values[i] for i in b) - max(values[i] for i in a) > tol


def test_check_invariance():
    y = [1.0, 1.0, 2.0]
    assert check_invariance(y, (0, 1, 2), 0.0)
    assert check_invariance(y, (1, 0, 2), 1e-12)
    assert not check_invariance(y, (2, 1, 0), 1e-6)
    with pytest.raises(ValueError):
        check_invariance(y, (0, 1), 1e-6)


def test_sample_params_reproducible_and_in_range():
    assert sample_params(7) == sample_params(7)
    assert sample_params(7) != sample_params(8)
    alphas, a2s = [], []
    for seed in range(10_000):
        p = sample_params(seed)
        alphas.append(p.alpha)
        a2s.append(p.a2)
        assert p.clustering_regime()
    assert 0.1 <= min(alphas) and max(alphas) <= 1.0
    assert 0.1 <= min(a2s) and max(a2s) <= 10.0
