"""Dense primal simplex for min |V w - target|_1 over the probability simplex.

LP form: variables w (d), t+ (K), t- (K), all >= 0, with
    V w + t+ - t- = target,   1^T w = 1,   minimise sum(t+ + t-).
With w = e_1 the residual is target - V[:, 0]; taking t+ or t- by its sign
gives a feasible starting basis that is diagonal, so no phase one is needed.
Pricing is Dantzig's (most negative reduced cost); after a run of
degenerate pivots it switches to Bland's smallest-index rule until the
objective moves again, which rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

PIVOT_TOL = 1e-12
DEGENERATE_RUN = 20
WEIGHT_FLOOR = 1e-12


@dataclass
class LPResult:
    weights: np.ndarray
    objective: float
    iterations: int


def _state(T, basis, d, K):
    n = d + 2 * K
    x = np.zeros(n)
    x[basis] = T[:-1, -1]
    w = np.clip(x[:d], 0.0, None)
    w[w < WEIGHT_FLOOR] = 0.0
    total = w.sum()
    if total > 0:
        w = w / total
    return LPResult(w, float(-T[-1, -1]), 0)


def solve_l1_simplex_lp(V, target, max_iter: int | None = None) -> LPResult:
    """Global minimiser of |V w - target|_1 subject to w >= 0, sum(w) = 1.

    Returned weights are clamped at 1e-12 and renormalised; ``objective`` is
    recomputed from those weights.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    b = np.asarray(target, dtype=float).ravel()
    K, d = V.shape
    if d < 1 or K < 1:
        raise ValueError("need at least one moment and one grid point")
    if b.shape[0] != K:
        raise ValueError("target length must match the rows of V")
    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite LP data")
    n = d + 2 * K
    m = K + 1
    A = np.zeros((m, n))
    A[:K, :d] = V
    A[:K, d:d + K] = np.eye(K)
    A[:K, d + K:] = -np.eye(K)
    A[K, :d] = 1.0
    rhs = np.concatenate([b, [1.0]])
    resid = b - V[:, 0]
    basis = np.empty(m, dtype=int)
    for i in range(K):
        if resid[i] >= 0:
            basis[i] = d + i
        else:
            basis[i] = d + K + i
            A[i] *= -1.0
            rhs[i] *= -1.0
    basis[K] = 0
    # eliminate the w_1 column from the slack rows so the basis is the identity
    for i in range(K):
        f = A[i, 0]
        if f:
            A[i] -= f * A[K]
            rhs[i] -= f * rhs[K]
    cost = np.zeros(n)
    cost[d:] = 1.0
    T = np.zeros((m + 1, n + 1))
    T[:m, :n] = A
    T[:m, -1] = rhs
    T[-1, :n] = cost
    T[-1] -= cost[basis] @ T[:m]

    guard = max_iter if max_iter is not None else 50 * (n + m)
    stalled = 0
    for it in range(1, guard + 1):
        reduced = T[-1, :n]
        entering = np.flatnonzero(reduced < -PIVOT_TOL)
        if entering.size == 0:
            res = _finish(V, b, T, basis, d, K)
            res.iterations = it - 1
            return res
        bland = stalled >= DEGENERATE_RUN
        j = int(entering[0]) if bland else int(entering[np.argmin(reduced[entering])])
        col = T[:m, j]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise NumericalError("LP unbounded (cannot happen on the simplex)", last=_state(T, basis, d, K))
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        r = int(ties[np.argmin(basis[ties])])
        stalled = stalled + 1 if best <= PIVOT_TOL else 0
        T[r] /= T[r, j]
        others = np.arange(m + 1) != r
        T[others] -= np.outer(T[others, j], T[r])
        basis[r] = j
    raise NumericalError(f"simplex exceeded {guard} pivots", last=_state(T, basis, d, K))


def _finish(V, b, T, basis, d, K):
    res = _state(T, basis, d, K)
    res.objective = float(np.abs(V @ res.weights - b).sum())
    return res
