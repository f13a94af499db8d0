"""Point estimators of ||A||_s from one observation Y = A + E.

All estimators clamp before taking roots, so returned norms are >= 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .debias import MAX_K, evaluate_U_k, get_plan
from .errors import ConfigurationError
from .linalg import as_matrix, schatten_norm, svd_values, trace_powers
from .polys import PolyCoeffs, abs_expansion, remez_best_poly

DEFAULT_M = 2.0


@dataclass(frozen=True)
class PolySpec:
    """Approximating polynomial a_0..a_K of y**(s/2) on [0, 1] and scale M."""

    coeffs: np.ndarray
    M: float
    s: float

    def __post_init__(self):
        if not self.M > 1:
            raise ValueError("scale M must exceed 1")
        if len(self.coeffs) - 1 > 40:
            raise ValueError("polynomial degree capped at 40")

    @property
    def K(self) -> int:
        return len(self.coeffs) - 1


@dataclass
class EstimateReport:
    estimator: str
    value: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self):
        return {"estimator": self.estimator, "value": self.value, "diagnostics": self.diagnostics}


def default_degree(q: int) -> int:
    """K* = max(1, floor(log2(q) / 6)): the largest K with 2**(3K) <= sqrt(q),
    capped by the available debiasing plans."""
    return min(MAX_K, max(1, int(math.floor(math.log2(q) / 6))))


def estimate_frobenius(Y) -> float:
    """(||Y||_2^2 - pq)_+^(1/2)."""
    M = as_matrix(Y)
    u1 = math.fsum((M.data * M.data).ravel()) - M.p * M.q
    return math.sqrt(max(u1, 0.0))


def estimate_operator(Y) -> float:
    """(sigma_1(Y)^2 - p)_+^(1/2)."""
    M = as_matrix(Y)
    s1 = svd_values(M)[0]
    return math.sqrt(max(s1 * s1 - M.p, 0.0))


def U_k(Y, k: int, plans=None) -> float:
    M = as_matrix(Y)
    return evaluate_U_k(trace_powers(M, k), get_plan(k, plans), M.p, M.q)


def estimate_even_schatten(Y, k: int, plan=None) -> float:
    """(U_k)_+^(1/(2k)) for ||A||_{2k}."""
    if plan is not None and plan.k != k:
        raise ConfigurationError(f"plan is for k={plan.k}, requested k={k}")
    M = as_matrix(Y)
    plan = plan or get_plan(k)
    u = evaluate_U_k(trace_powers(M, k), plan, M.p, M.q)
    return max(u, 0.0) ** (1.0 / (2 * k))


def estimate_plugin_Ts(Y, s: float) -> float:
    """T_s = [sum_i ((sigma_i(Y)^2 - p)_+)^(s/2)]^(1/s)."""
    if not s >= 1:
        raise ValueError("s must be >= 1")
    M = as_matrix(Y)
    shifted = np.clip(svd_values(M) ** 2 - M.p, 0.0, None)
    return schatten_norm(np.sqrt(shifted), s)


def estimate_naive(Y, s: float) -> float:
    """||Y||_s, the uncorrected plug-in baseline."""
    if not s >= 1:
        raise ValueError("s must be >= 1")
    return schatten_norm(svd_values(Y), s)


def _is_even_integer(s):
    return float(s).is_integer() and int(s) % 2 == 0


def approximating_poly(s: float, K: int) -> PolyCoeffs:
    """Polynomial P with P(y) ~ y**(s/2) on [0, 1] used by G_s."""
    if _is_even_integer(s):
        c = np.zeros(int(s) // 2 + 1)
        c[-1] = 1.0
        return PolyCoeffs(c)
    if s == 1:
        return abs_expansion(K)
    return remez_best_poly(s, K).poly


def poly_spec(s: float, M: float = DEFAULT_M, K: int | None = None, q: int | None = None) -> PolySpec:
    if K is None:
        if _is_even_integer(s):
            K = int(s) // 2
        elif q is None:
            raise ValueError("need K or q to choose the degree")
        else:
            K = default_degree(q)
    return PolySpec(np.asarray(approximating_poly(s, K).coeffs, dtype=float), float(M), float(s))


def g_statistic(Y, spec: PolySpec, plans=None):
    """G_s[P; Y] and the U_k values it used.

    G_s = (M (pq)^(1/4))^s [q a_0 + sum_k a_k U_k / (M (pq)^(1/4))^(2k)],
    whose mean is (M (pq)^(1/4))^s sum_i P(sigma_i^2 / (M^2 sqrt(pq))), the
    polynomial surrogate for ||A||_s^s.
    """
    Mx = as_matrix(Y)
    p, q = Mx.p, Mx.q
    K = spec.K
    if K > MAX_K:
        raise ConfigurationError(f"degree {K} needs U_k plans beyond k={MAX_K}")
    scale = spec.M * (p * q) ** 0.25
    traces = trace_powers(Mx, K) if K else np.zeros(0)
    us = [evaluate_U_k(traces, get_plan(k, plans), p, q) for k in range(1, K + 1)]
    terms = [q * spec.coeffs[0]] + [a * u / scale ** (2 * k)
                                    for k, (a, u) in enumerate(zip(spec.coeffs[1:], us), start=1)]
    return scale**spec.s * math.fsum(terms), us


def estimate_poly_schatten(Y, s: float, M: float = DEFAULT_M, K: int | None = None, plans=None) -> float:
    """(G_s)_+^(1/s) with a Chebyshev (s = 1), exact (even s) or Remez polynomial."""
    spec = poly_spec(s, M, K, q=as_matrix(Y).q)
    g, _ = g_statistic(Y, spec, plans)
    return max(g, 0.0) ** (1.0 / s)


def check_scale_hypothesis(Y, M: float) -> float:
    """Ratio estimate_operator(Y) / (pq)^(1/4); a value above M casts doubt on
    sigma_1(A) <= M (pq)^(1/4). Warns in that case."""
    Mx = as_matrix(Y)
    ratio = estimate_operator(Mx) / (Mx.p * Mx.q) ** 0.25
    if ratio > M:
        warnings.warn(f"estimated sigma_1(A)/(pq)^(1/4) = {ratio:.3g} exceeds M = {M}", stacklevel=2)
    return ratio


def estimate(Y, method: str, s: float | None = None, k: int | None = None,
             M: float | None = None, K: int | None = None, plans=None) -> EstimateReport:
    """Dispatch by method name and collect diagnostics."""
    from .ranks import estimate_er2inf

    Mx = as_matrix(Y)
    diag = {"p": Mx.p, "q": Mx.q, "transposed": Mx.transposed}
    if method == "frobenius":
        value = estimate_frobenius(Mx)
        diag["U"] = {"1": math.fsum((Mx.data**2).ravel()) - Mx.p * Mx.q}
    elif method == "operator":
        value = estimate_operator(Mx)
    elif method == "even":
        if k is None:
            if s is None or not _is_even_integer(s):
                raise ValueError("method 'even' needs --k or an even --norm")
            k = int(s) // 2
        plan = get_plan(k, plans)
        u = evaluate_U_k(trace_powers(Mx, k), plan, Mx.p, Mx.q)
        value = max(u, 0.0) ** (1.0 / (2 * k))
        diag.update(k=k, U={str(k): u})
    elif method in ("plugin", "naive"):
        if s is None:
            raise ValueError(f"method {method!r} needs --norm")
        value = estimate_plugin_Ts(Mx, s) if method == "plugin" else estimate_naive(Mx, s)
    elif method == "poly":
        if s is None:
            raise ValueError("method 'poly' needs --norm")
        M = DEFAULT_M if M is None else M
        spec = poly_spec(s, M, K, q=Mx.q)
        g, us = g_statistic(Mx, spec, plans)
        value = max(g, 0.0) ** (1.0 / s)
        diag.update(K=spec.K, M=M, G=g, coeffs=list(map(float, spec.coeffs)),
                    U={str(i + 1): u for i, u in enumerate(us)},
                    sigma1_ratio=estimate_operator(Mx) / (Mx.p * Mx.q) ** 0.25)
    elif method == "er2inf":
        value = estimate_er2inf(Mx)
    else:
        raise ValueError(f"unknown method {method!r}")
    return EstimateReport(method, float(value), diag)
