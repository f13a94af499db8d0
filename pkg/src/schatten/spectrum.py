"""Singular-spectrum recovery by matching normalised even moments on a grid.

Spectra are handled in the normalised variable x = sigma / (M (pq)^(1/4)),
which lies in [0, 1] under the working hypothesis sigma_1(A) <= M (pq)^(1/4).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .debias import evaluate_U_k, get_plan
from .estimators import DEFAULT_M, default_degree
from .linalg import as_matrix, as_spectrum, svd_values, trace_powers
from .lp import solve_l1_simplex_lp

MAX_GRID = 200_000
MIN_MOMENTS = 2


def default_moments(q: int) -> int:
    """K* of the estimators, floored at 2: one moment fixes only the mean of
    x**2, and the LP then returns an arbitrary two-atom measure."""
    return max(MIN_MOMENTS, default_degree(q))


@dataclass
class MomentVector:
    values: np.ndarray
    U: list = field(default_factory=list)


@dataclass
class GridDistribution:
    """Weights on the regular grid 0, step, 2 step, ..."""

    step: float
    weights: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        return np.arange(len(self.weights)) * self.step


@dataclass
class SpectrumResult:
    sigma_hat: np.ndarray
    objective: float
    grid_step: float
    distribution: GridDistribution | None = None

    def to_json(self):
        return {"sigma_hat": [float(v) for v in self.sigma_hat],
                "objective": self.objective, "grid_step": self.grid_step}


def normalized_moments(Y, M: float, K: int, plans=None) -> MomentVector:
    """m_k = U_k / (q (M (pq)^(1/4))^(2k)) for k = 1..K."""
    Mx = as_matrix(Y)
    p, q = Mx.p, Mx.q
    plan_list = [get_plan(k, plans) for k in range(1, K + 1)]
    traces = trace_powers(Mx, K)
    us = [evaluate_U_k(traces, plan, p, q) for plan in plan_list]
    scale2 = M * M * math.sqrt(p * q)
    vals = np.array([u / (q * scale2**k) for k, u in enumerate(us, start=1)])
    return MomentVector(vals, us)


def moment_grid(q: int, M: float):
    """Grid step 1/(M^2 q) over [0, 1], coarsened when longer than MAX_GRID."""
    step = 1.0 / (M * M * q)
    d = math.ceil(1.0 / step) + 1
    if d > MAX_GRID:
        warnings.warn(f"grid of {d} points coarsened to {MAX_GRID}", stacklevel=3)
        d = MAX_GRID
        step = 1.0 / (d - 1)
    return step, d


def quantile_readout(dist: GridDistribution, q: int) -> np.ndarray:
    """x_(i) = min{x_j : sum_{l<=j} w_l >= i/(q+1)}, i = 1..q, sorted nonincreasing."""
    cum = np.cumsum(dist.weights)
    levels = np.arange(1, q + 1) / (q + 1)
    idx = np.searchsorted(cum, levels, side="left")
    idx = np.minimum(idx, len(cum) - 1)
    return np.sort(dist.grid[idx])[::-1]


def recover_from_moments(moments, q: int, M: float, p: int) -> SpectrumResult:
    """LP fit of a grid distribution to normalised moments, then rescaled quantiles."""
    m = np.asarray(getattr(moments, "values", moments), dtype=float)
    K = len(m)
    step, d = moment_grid(q, M)
    x = np.arange(d) * step
    V = np.vstack([x ** (2 * k) for k in range(1, K + 1)])
    res = solve_l1_simplex_lp(V, m)
    dist = GridDistribution(step, res.weights)
    scale = M * (p * q) ** 0.25
    return SpectrumResult(scale * quantile_readout(dist, q), res.objective, step, dist)


def recover_spectrum(Y, M: float = DEFAULT_M, K: int | None = None, plans=None) -> SpectrumResult:
    Mx = as_matrix(Y)
    K = default_moments(Mx.q) if K is None else K
    mom = normalized_moments(Mx, M, K, plans)
    return recover_from_moments(mom, Mx.q, M, Mx.p)


def plugin_spectrum(Y) -> np.ndarray:
    """sqrt((sigma_i(Y)^2 - p)_+), sorted nonincreasing."""
    Mx = as_matrix(Y)
    return np.sqrt(np.clip(svd_values(Mx) ** 2 - Mx.p, 0.0, None))


def wasserstein_sorted(u, v) -> float:
    """W1 between the empirical measures of two equal-length spectra."""
    a, b = as_spectrum(u), as_spectrum(v)
    if a.shape != b.shape:
        raise ValueError("spectra must have equal length")
    return math.fsum(np.abs(a - b)) / len(a)
