"""Hermite and Chebyshev polynomials, the Chebyshev expansion of |x| and a
Remez exchange for best uniform approximation of |x|**s by even polynomials.

Approximants of |x|**s on [-1, 1] are stored through the substitution
y = x**2, i.e. as a degree-K polynomial P with P(x**2) ~ |x|**s, which is the
same as P(y) ~ y**(s/2) on [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import minimize_scalar

from .errors import NumericalError

MAX_HERMITE = 60
MAX_CHEBYSHEV = 200
MAX_DEGREE = 40


@dataclass(frozen=True)
class PolyCoeffs:
    """Monomial coefficients, ``coeffs[i]`` multiplies ``y**i``.

    ``cheb`` optionally holds the same polynomial in the shifted Chebyshev
    basis T_k(2y - 1) of [0, 1]. When present it is used for evaluation,
    since monomial Horner loses all accuracy once the coefficients approach
    2**(3K).
    """

    coeffs: np.ndarray
    cheb: np.ndarray | None = None

    @property
    def degree(self) -> int:
        return len(self.trimmed().coeffs) - 1

    def trimmed(self) -> "PolyCoeffs":
        c = np.asarray(self.coeffs, dtype=float)
        nz = np.flatnonzero(c)
        last = nz[-1] if nz.size else 0
        return PolyCoeffs(c[: last + 1].copy(), self.cheb)

    def horner(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for a in self.coeffs[::-1]:
            out = out * y + a
        return out

    def __call__(self, y):
        if self.cheb is not None:
            return C.chebval(2.0 * np.asarray(y, dtype=float) - 1.0, self.cheb)
        return self.horner(y)

    def even(self, x):
        """Evaluate P(x**2); via the even Chebyshev series in x when available."""
        x = np.asarray(x, dtype=float)
        if self.cheb is not None:
            # T_k(2x^2 - 1) = T_2k(x)
            full = np.zeros(2 * len(self.cheb) - 1)
            full[::2] = self.cheb
            return C.chebval(x, full)
        return self.horner(x * x)


def _int_poly_hermite(r):
    prev, cur = [1], [0, 1]
    if r == 0:
        return prev
    for n in range(1, r):
        nxt = [0] + cur
        for i, c in enumerate(prev):
            nxt[i] -= n * c
        prev, cur = cur, nxt
    return cur


def hermite_coeffs(r: int) -> PolyCoeffs:
    """Probabilists' Hermite polynomial He_r, built from
    He_{r+1}(y) = y He_r(y) - r He_{r-1}(y) in exact integers."""
    if r < 0 or r > MAX_HERMITE:
        raise ValueError(f"Hermite degree must lie in [0, {MAX_HERMITE}], got {r}")
    return PolyCoeffs(np.array(_int_poly_hermite(r), dtype=float))


def hermite_table(y, rmax: int):
    """Stack ``He_0(y) .. He_rmax(y)`` along a new leading axis (recurrence)."""
    y = np.asarray(y, dtype=float)
    out = np.empty((rmax + 1,) + y.shape)
    out[0] = 1.0
    if rmax >= 1:
        out[1] = y
    for n in range(1, rmax):
        out[n + 1] = y * out[n] - n * out[n - 1]
    return out


@lru_cache(maxsize=None)
def _int_poly_chebyshev(k):
    prev, cur = (1,), (0, 1)
    if k == 0:
        return prev
    for _ in range(1, k):
        nxt = [0] + [2 * c for c in cur]
        for i, c in enumerate(prev):
            nxt[i] -= c
        prev, cur = cur, tuple(nxt)
    return cur


def chebyshev_coeffs(k: int) -> PolyCoeffs:
    """Monomial coefficients of the Chebyshev polynomial of the first kind."""
    if k < 0 or k > MAX_CHEBYSHEV:
        raise ValueError(f"Chebyshev degree must lie in [0, {MAX_CHEBYSHEV}], got {k}")
    return PolyCoeffs(np.array(_int_poly_chebyshev(k), dtype=float))


def abs_expansion_exact(K: int) -> list[Fraction]:
    """Coefficients of P*_K times pi, as exact rationals.

    B_K(x) = 2/pi + 4/pi sum_{k<=K} (-1)**(k+1) T_2k(x) / (4k**2 - 1) and
    P*_K(x**2) = B_K(x); T_2k has only even powers so x**(2i) -> y**i.
    """
    if K < 1:
        raise ValueError("K must be a positive integer")
    out = [Fraction(0)] * (K + 1)
    out[0] += 2
    for k in range(1, K + 1):
        w = Fraction(4 * (-1) ** (k + 1), 4 * k * k - 1)
        for i, c in enumerate(_int_poly_chebyshev(2 * k)[::2]):
            out[i] += w * c
    return out


def abs_expansion(K: int) -> PolyCoeffs:
    """P*_K with P*_K(x**2) equal to the degree-2K Chebyshev expansion of |x|."""
    exact = abs_expansion_exact(K)
    cheb = np.array([2.0] + [4.0 * (-1) ** (k + 1) / (4 * k * k - 1) for k in range(1, K + 1)])
    return PolyCoeffs(np.array([float(c) for c in exact]) / math.pi, cheb / math.pi)


def abs_expansion_bound(K: int) -> float:
    return 2.0 / (math.pi * (2 * K + 1))


def eval_exact_on_grid(exact: list[Fraction], n: int) -> np.ndarray:
    """Evaluate sum_i exact[i] * y**i at y = j / n, j = 0..n, without rounding
    until the final division (integer Horner on a common denominator)."""
    den = 1
    for c in exact:
        den = den * c.denominator // math.gcd(den, c.denominator)
    nums = [c.numerator * (den // c.denominator) for c in exact]
    K = len(nums) - 1
    j = np.arange(n + 1, dtype=object)
    acc = np.zeros(n + 1, dtype=object)
    for i in range(K, -1, -1):
        acc = acc * j + nums[i] * n ** (K - i)
    scale = den * n**K
    return np.array([a / scale for a in acc], dtype=float)


@dataclass
class RemezResult:
    poly: PolyCoeffs
    error: float
    reference: np.ndarray
    iterations: int
    spread: float


def _target(s):
    return lambda x: np.abs(x) ** s


def _local_extrema(err, xs, K):
    """One extremum of |err| per maximal same-sign run on the sample grid."""
    e = err(xs)
    sign = np.sign(e)
    sign[sign == 0] = 1
    cuts = np.flatnonzero(np.diff(sign)) + 1
    bounds = np.concatenate([[0], cuts, [len(xs)]])
    pts = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        i = lo + int(np.argmax(np.abs(e[lo:hi])))
        a = xs[max(i - 1, 0)]
        b = xs[min(i + 1, len(xs) - 1)]
        x_best = xs[i]
        if 0 < i < len(xs) - 1:
            sgn = sign[i]
            res = minimize_scalar(lambda t: -sgn * err(t), bounds=(a, b),
                                  method="bounded", options={"xatol": 1e-15})
            if res.success and abs(err(res.x)) > abs(e[i]):
                x_best = float(res.x)
        pts.append(x_best)
    pts = np.array(pts)
    vals = err(pts)
    # keep K + 2 alternating points, dropping the weaker end each time
    while len(pts) > K + 2:
        if abs(vals[0]) < abs(vals[-1]):
            pts, vals = pts[1:], vals[1:]
        else:
            pts, vals = pts[:-1], vals[:-1]
    return pts, vals


def remez_best_poly(s: float, K: int, max_iter: int = 100, tol: float = 1e-10) -> RemezResult:
    """Best uniform approximation of |x|**s on [-1, 1] by P(x**2), deg P = K.

    Works in x on [0, 1] with the even Chebyshev basis T_2k(x), which is
    well conditioned up to the degree cap. Each iteration solves the
    levelled-error system on K + 2 reference points, then moves the whole
    reference to the local extrema of the new error curve.
    """
    if not s >= 1:
        raise ValueError("s must be >= 1")
    if float(s).is_integer() and int(s) % 2 == 0:
        raise ValueError("even integer s is a polynomial; no approximation needed")
    if K < 1 or K > MAX_DEGREE:
        raise ValueError(f"degree must lie in [1, {MAX_DEGREE}]")
    f = _target(s)
    ref = np.sort(np.cos(np.arange(K + 2) * np.pi / (2 * K + 2)))
    theta = np.linspace(0.0, np.pi / 2, max(20000, 800 * K))
    xs = np.unique(np.concatenate([np.cos(theta), np.linspace(0, 1, 4001)]))
    signs = (-1.0) ** np.arange(K + 2)

    def even_basis(x):
        return C.chebvander(np.atleast_1d(x), 2 * K)[:, ::2]

    cheb = None
    spread = math.inf
    for it in range(1, max_iter + 1):
        A = np.column_stack([even_basis(ref), signs])
        sol = np.linalg.solve(A, f(ref))
        cheb = sol[:-1]
        full = np.zeros(2 * K + 1)
        full[::2] = cheb

        def err(x, full=full):
            return C.chebval(x, full) - f(x)

        pts, vals = _local_extrema(err, xs, K)
        mags = np.abs(vals)
        if len(pts) < K + 2:
            raise NumericalError(f"lost alternation at iteration {it}", last=_pack(cheb, K, err, xs, ref, it, spread))
        spread = float((mags.max() - mags.min()) / mags.max())
        ref = pts
        if spread < tol:
            return _pack(cheb, K, err, xs, ref, it, spread)
    raise NumericalError(f"Remez did not converge in {max_iter} iterations (spread {spread:.3g})",
                         last=_pack(cheb, K, err, xs, ref, max_iter, spread))


def _pack(cheb, K, err, xs, ref, it, spread):
    # even Chebyshev series in x  <->  shifted Chebyshev series in y = x^2
    mono = C.Chebyshev(cheb, domain=[0, 1]).convert(kind=np.polynomial.Polynomial).coef
    mono = np.pad(mono, (0, K + 1 - len(mono)))
    error = float(max(np.abs(err(xs)).max(), np.abs(err(ref)).max()))
    return RemezResult(PolyCoeffs(mono, np.array(cheb)), error, np.array(ref), it, spread)


def sup_error(poly: PolyCoeffs, s: float, n: int = 100001) -> float:
    """Grid sup of |P(x**2) - |x|**s| over x in [0, 1] (stable evaluation)."""
    theta = np.linspace(0.0, np.pi / 2, n)
    x = np.unique(np.concatenate([np.cos(theta), np.linspace(0.0, 1.0, n)]))
    return float(np.max(np.abs(poly.even(x) - x**s)))
