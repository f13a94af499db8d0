import math
from fractions import Fraction

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss

from schatten.errors import NumericalError
from schatten.polys import (abs_expansion, abs_expansion_bound, abs_expansion_exact, chebyshev_coeffs,
                            hermite_coeffs, hermite_table, remez_best_poly, sup_error)

NODES, WEIGHTS = hermegauss(64)
WEIGHTS = WEIGHTS / math.sqrt(2 * math.pi)


def gauss_mean(f):
    """E[f(Z)] for standard normal Z by 64-point Gauss-Hermite quadrature."""
    return float(np.sum(WEIGHTS * f(NODES)))


def test_hermite_low_orders():
    assert list(hermite_coeffs(0).coeffs) == [1]
    assert list(hermite_coeffs(1).coeffs) == [0, 1]
    assert list(hermite_coeffs(2).coeffs) == [-1, 0, 1]
    with pytest.raises(ValueError):
        hermite_coeffs(61)


def test_hermite_moment_identity():
    H2, H4 = hermite_coeffs(2), hermite_coeffs(4)
    assert gauss_mean(lambda z: H2.horner(0.7 + z)) == pytest.approx(0.49, abs=1e-10)
    assert gauss_mean(lambda z: H4.horner(1.5 + z)) == pytest.approx(5.0625, abs=1e-8)


def test_hermite_table_matches_coefficients(rng):
    y = rng.standard_normal(7)
    table = hermite_table(y, 9)
    for r in range(10):
        assert np.allclose(table[r], hermite_coeffs(r).horner(y), rtol=1e-12, atol=1e-9)


def test_chebyshev_examples(rng):
    assert list(chebyshev_coeffs(0).coeffs) == [1]
    assert list(chebyshev_coeffs(2).coeffs) == [-1, 0, 2]
    theta = rng.uniform(0, 2 * np.pi, 100)
    assert np.allclose(chebyshev_coeffs(6).horner(np.cos(theta)), np.cos(6 * theta), atol=1e-10)
    with pytest.raises(ValueError):
        chebyshev_coeffs(201)


def test_abs_expansion_K1():
    exact = abs_expansion_exact(1)
    assert exact == [Fraction(2, 3), Fraction(8, 3)]
    assert np.allclose(abs_expansion(1).coeffs, [2 / (3 * math.pi), 8 / (3 * math.pi)])


def test_abs_expansion_even_representation(rng):
    x = rng.uniform(-1, 1, 500)
    for K in (1, 4, 10):
        P = abs_expansion(K)
        # B_K straight from the Chebyshev series in x
        B = 2 / math.pi + 4 / math.pi * sum((-1) ** (k + 1) * np.cos(2 * k * np.arccos(x)) / (4 * k * k - 1)
                                            for k in range(1, K + 1))
        assert np.allclose(P.even(x), B, atol=1e-12)
        assert np.allclose(P.horner(x * x), B, atol=1e-12 * 8**K)


def test_remez_beats_chebyshev_s1():
    for K in (2, 5, 8):
        best = remez_best_poly(1, K)
        assert sup_error(best.poly, 1) <= sup_error(abs_expansion(K), 1) + 1e-12


def test_remez_equioscillation_s3():
    r3 = remez_best_poly(3, 3)
    errs = r3.poly.even(r3.reference) - r3.reference**3
    assert len(r3.reference) >= 5
    assert np.all(np.sign(errs[1:]) == -np.sign(errs[:-1]))
    assert (np.abs(errs).max() - np.abs(errs).min()) / np.abs(errs).max() < 1e-8
    assert remez_best_poly(3, 6).error < r3.error


def test_remez_s1_bernstein_trend():
    scaled = [K * remez_best_poly(1, K).error for K in (10, 20, 40)]
    assert max(scaled) / min(scaled) < 1.2
    assert 0.1 < min(scaled) < 0.2


def test_remez_fractional_s():
    r = remez_best_poly(1.5, 6)
    assert r.error == pytest.approx(sup_error(r.poly, 1.5), rel=1e-6)


def test_remez_argument_errors():
    with pytest.raises(ValueError):
        remez_best_poly(2, 3)
    with pytest.raises(ValueError):
        remez_best_poly(0.5, 3)
    with pytest.raises(ValueError):
        remez_best_poly(1, 41)


def test_remez_failure_carries_last_iterate():
    with pytest.raises(NumericalError) as info:
        remez_best_poly(1, 12, max_iter=1)
    assert info.value.last is not None and info.value.last.poly.degree == 12


@pytest.mark.parametrize("r", range(9))
def test_hermite_orthogonality(r):
    Hr = hermite_coeffs(r)
    for l in range(9):
        Hl = hermite_coeffs(l)
        want = math.factorial(r) if r == l else 0.0
        assert gauss_mean(lambda z: Hr.horner(z) * Hl.horner(z)) == pytest.approx(want, abs=1e-6)


def test_bound_value():
    assert abs_expansion_bound(3) == pytest.approx(2 / (7 * math.pi))
