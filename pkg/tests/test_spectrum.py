import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from schatten.errors import ConfigurationError, NumericalError
from schatten.lp import solve_l1_simplex_lp
from schatten.spectrum import (GridDistribution, default_moments, moment_grid, normalized_moments,
                               plugin_spectrum, quantile_readout, recover_from_moments,
                               recover_spectrum, wasserstein_sorted)


def embed(sv, p):
    A = np.zeros((p, len(sv)))
    A[np.arange(len(sv)), np.arange(len(sv))] = sv
    return A


def even_vandermonde(x, K):
    return np.vstack([x ** (2 * k) for k in range(1, K + 1)])


def simplex_lattice(d, n):
    """All points of the simplex with coordinates in (1/n) Z (stars and bars)."""
    bars = np.array(list(itertools.combinations(range(n + d - 1), d - 1)))
    edges = np.hstack([-np.ones((len(bars), 1), dtype=int), bars, np.full((len(bars), 1), n + d - 1)])
    return (np.diff(edges, axis=1) - 1) / n


def test_lp_exact_two_point():
    V = np.array([[0.0, 1.0]])
    res = solve_l1_simplex_lp(V, V @ [0.3, 0.7])
    assert np.allclose(res.weights, [0.3, 0.7]) and res.objective == pytest.approx(0, abs=1e-14)


def test_lp_boundary_vertex():
    x = np.linspace(0, 1, 6)
    res = solve_l1_simplex_lp(even_vandermonde(x, 3), [10, 10, 10])
    assert np.array_equal(res.weights, np.eye(6)[-1])
    assert res.objective == pytest.approx(27)


def test_lp_against_lattice_oracle(rng):
    d, K, n = 8, 3, 20
    lattice = simplex_lattice(d, n)
    assert len(lattice) == math.comb(n + d - 1, d - 1)
    for _ in range(3):
        x = np.sort(rng.random(d))
        V = even_vandermonde(x, K)
        target = V @ rng.dirichlet(np.ones(d)) + rng.normal(0, 0.05, K)
        res = solve_l1_simplex_lp(V, target)
        brute = np.abs(lattice @ V.T - target).sum(axis=1).min()
        assert res.objective <= brute + 1e-12
        assert brute - res.objective <= K * 2 * (d - 1) / n


def test_lp_optimality_certificate(rng):
    x = np.linspace(0, 1, 30)
    V = even_vandermonde(x, 4)
    target = V @ rng.dirichlet(np.ones(30)) * 1.1
    res = solve_l1_simplex_lp(V, target)
    w = res.weights
    base = np.abs(V @ w - target).sum()
    delta = 1e-6
    for i in np.flatnonzero(w > delta):
        for j in range(len(w)):
            if i != j:
                w2 = w.copy()
                w2[i] -= delta
                w2[j] += delta
                assert np.abs(V @ w2 - target).sum() >= base - 1e-12


def test_lp_guard_and_inputs():
    x = np.linspace(0, 1, 50)
    V = even_vandermonde(x, 3)
    with pytest.raises(NumericalError) as info:
        solve_l1_simplex_lp(V, V @ np.full(50, 1 / 50), max_iter=1)
    assert info.value.last is not None
    with pytest.raises(ValueError):
        solve_l1_simplex_lp(V, [1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_exact_moment_round_trip(K, d, seed):
    r = np.random.default_rng(seed)
    x = np.arange(d) / (d - 1)
    V = even_vandermonde(x, K)
    g = r.dirichlet(np.ones(d) * 0.3)
    res = solve_l1_simplex_lp(V, V @ g)
    assert res.objective <= 1e-8
    assert np.allclose(V @ res.weights, V @ g, atol=1e-8)
    assert res.weights.sum() == pytest.approx(1, abs=1e-9) and np.all(res.weights >= 0)


def test_normalized_moments_examples():
    mom = normalized_moments(np.zeros((4, 4)), 2.0, 1)
    assert mom.values[0] == pytest.approx(-0.25)
    assert mom.U == [-16]


def test_normalized_moment_m2_monte_carlo():
    # A = diag(2, 1) in 3 x 2: E[m2] = 17 / (q (M 6^(1/4))^4)
    rng = np.random.default_rng(3)
    p, q, M = 3, 2, 1.5
    A = embed([2, 1], p)
    Y = A + rng.standard_normal((10**6, p, q))
    G = np.einsum("nij,nil->njl", Y, Y)
    t1 = np.trace(G, axis1=1, axis2=2)
    t2 = np.einsum("nij,nji->n", G, G)
    u2 = t2 - 2 * (p + q + 1) * t1 + p * q * (1 + p + q)
    m2 = u2 / (q * (M * (p * q) ** 0.25) ** 4)
    want = 17 / (2 * (M * 6**0.25) ** 4)
    assert abs(m2.mean() - want) <= 4 * m2.std(ddof=1) / math.sqrt(len(m2))
    one = normalized_moments(Y[0], M, 2).values[1]
    assert one == pytest.approx(m2[0], rel=1e-9)


def test_normalized_moments_missing_plan():
    with pytest.raises(ConfigurationError):
        normalized_moments(np.zeros((4, 3)), 2.0, 2, plans={})


def test_exact_injection_zero_spectrum():
    p = q = 16
    M = 2.0
    res = recover_from_moments(np.zeros(3), q, M, p)
    assert np.all(res.sigma_hat <= res.grid_step * M * (p * q) ** 0.25)


def test_exact_injection_grid_point():
    p, q, M = 20, 10, 1.5
    step, _ = moment_grid(q, M)
    x = 13 * step
    res = recover_from_moments(np.array([x ** (2 * k) for k in range(1, 4)]), q, M, p)
    assert np.all(res.sigma_hat == M * (p * q) ** 0.25 * x)


def test_saturated_moments_give_unit_normalised_spectrum():
    # sigma_i = M (pq)^(1/4) for all i makes every normalised moment 1
    p, q, M = 9, 4, 2.0
    sv = np.full(q, M * (p * q) ** 0.25)
    m = [np.sum((sv / (M * (p * q) ** 0.25)) ** (2 * k)) / q for k in (1, 2, 3)]
    assert np.allclose(m, 1)
    res = recover_from_moments(np.array(m), q, M, p)
    assert np.allclose(res.sigma_hat, sv)


def test_grid_layout_and_cap():
    step, d = moment_grid(64, 1.5)
    assert step == pytest.approx(1 / (1.5**2 * 64)) and (d - 1) * step >= 1
    with pytest.warns(UserWarning):
        step, d = moment_grid(10**6, 3.0)
    assert d == 200_000


def test_quantile_readout_rule():
    dist = GridDistribution(0.25, np.array([0.5, 0.0, 0.5, 0.0, 0.0]))
    # levels i/(q+1) = 1/4, 2/4, 3/4 against cumulative 0.5, 0.5, 1.0
    assert list(quantile_readout(dist, 3)) == [0.5, 0.0, 0.0]


@settings(max_examples=40, deadline=None)
@given(arrays(float, st.integers(2, 30), elements=st.floats(0, 1)), st.integers(1, 20))
def test_quantile_readout_monotone(w, q):
    if w.sum() == 0:
        w = np.ones_like(w)
    out = quantile_readout(GridDistribution(0.1, w / w.sum()), q)
    assert np.all(np.diff(out) <= 0)


def test_recover_spectrum_shape(rng):
    Y = embed(rng.uniform(0, 8, 12), 20) + rng.standard_normal((20, 12))
    res = recover_spectrum(Y, M=2.0)
    assert res.sigma_hat.shape == (12,) and np.all(np.diff(res.sigma_hat) <= 0)
    assert set(res.to_json()) == {"sigma_hat", "objective", "grid_step"}
    assert default_moments(12) == 2


def test_plugin_spectrum_examples(rng):
    assert np.all(plugin_spectrum(np.zeros((5, 3))) == 0)
    p = 7
    out = plugin_spectrum(embed([math.sqrt(p + 9), math.sqrt(p + 4)], p))
    assert np.allclose(out, [3, 2])
    n = 32
    tot = [plugin_spectrum(Y).sum() for Y in rng.standard_normal((1000, n, n))]
    assert np.mean(tot) <= 2 * n * (n * n) ** 0.25


def test_wasserstein_examples():
    assert wasserstein_sorted([1, 2, 3], [3, 2, 1]) == 0
    assert wasserstein_sorted([3, 1], [2, 0]) == 1
    with pytest.raises(ValueError):
        wasserstein_sorted([1], [1, 2])


def cdf_integral(u, v):
    pts = np.unique(np.concatenate([u, v, [0.0]]))
    Fu = np.searchsorted(np.sort(u), pts, side="right") / len(u)
    Fv = np.searchsorted(np.sort(v), pts, side="right") / len(v)
    return float(np.sum(np.abs(Fu - Fv)[:-1] * np.diff(pts)))


def test_wasserstein_matches_cdf_integral(rng):
    for _ in range(50):
        n = rng.integers(1, 20)
        u, v = rng.exponential(size=n), rng.exponential(size=n) * 2
        assert wasserstein_sorted(u, v) == pytest.approx(cdf_integral(u, v), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10).flatmap(lambda n: st.tuples(*[arrays(float, n, elements=st.floats(0, 50))] * 3)))
def test_wasserstein_triangle(triple):
    a, b, c = triple
    assert wasserstein_sorted(a, c) <= wasserstein_sorted(a, b) + wasserstein_sorted(b, c) + 1e-9
