"""Dense matrix primitives: ingestion, one-sided Jacobi SVD, Gram trace powers
and Schatten norms of a spectrum.

Every routine assumes the ``p >= q`` convention: a wide input is transposed on
ingestion and the flag is kept on the :class:`DenseMatrix`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

JACOBI_TOL = 1e-12
MAX_SWEEPS = 60


@dataclass(frozen=True)
class DenseMatrix:
    """A finite real ``p x q`` matrix with ``p >= q``."""

    data: np.ndarray
    transposed: bool = False

    @property
    def p(self) -> int:
        return self.data.shape[0]

    @property
    def q(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_array(cls, values) -> "DenseMatrix":
        arr = np.array(values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.size == 0:
            raise InputError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("matrix has non-finite entries")
        if arr.shape[0] < arr.shape[1]:
            return cls(np.ascontiguousarray(arr.T), transposed=True)
        return cls(arr, transposed=False)


def as_matrix(M) -> DenseMatrix:
    if isinstance(M, DenseMatrix):
        return M
    return DenseMatrix.from_array(M)


def as_spectrum(values) -> np.ndarray:
    """Validate and return a singular spectrum sorted nonincreasing."""
    arr = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise InputError("spectrum has non-finite values")
    if np.any(arr < 0):
        raise InputError("singular values must be nonnegative")
    return np.sort(arr)[::-1].copy()


def _round_robin(n):
    """Yield n - 1 rounds of disjoint index pairs covering every pair once."""
    players = list(range(n))
    for _ in range(n - 1):
        half = n // 2
        yield [(players[i], players[n - 1 - i]) for i in range(half)]
        players = [players[0], players[-1]] + players[1:-1]


def _jacobi_columns(U, tol=JACOBI_TOL, max_sweeps=MAX_SWEEPS):
    """Orthogonalise the columns of U in place (Hestenes one-sided Jacobi)."""
    q = U.shape[1]
    if q == 1:
        return 0
    n = q + (q % 2)
    rounds = []
    for pairs in _round_robin(n):
        pairs = [(i, j) for i, j in pairs if i < q and j < q]
        if pairs:
            a = np.array([min(i, j) for i, j in pairs])
            b = np.array([max(i, j) for i, j in pairs])
            rounds.append((a, b))
    scale = np.sum(U * U)
    if scale == 0.0:
        return 0
    floor = (np.finfo(float).eps * 1e-2) ** 2 * scale
    for sweep in range(1, max_sweeps + 1):
        worst = 0.0
        for a, b in rounds:
            Ua, Ub = U[:, a], U[:, b]
            alpha = np.einsum("ij,ij->j", Ua, Ua)
            beta = np.einsum("ij,ij->j", Ub, Ub)
            gamma = np.einsum("ij,ij->j", Ua, Ub)
            live = (alpha > floor) & (beta > floor)
            off = np.zeros_like(gamma)
            off[live] = np.abs(gamma[live]) / np.sqrt(alpha[live] * beta[live])
            worst = max(worst, float(off.max(initial=0.0)))
            rot = live & (off > tol)
            if not rot.any():
                continue
            a, b = a[rot], b[rot]
            alpha, beta, gamma = alpha[rot], beta[rot], gamma[rot]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t[zeta == 0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            Ua, Ub = U[:, a], U[:, b]
            U[:, a] = c * Ua - s * Ub
            U[:, b] = s * Ua + c * Ub
        if worst <= tol:
            return sweep
    return max_sweeps


def svd_values(M) -> np.ndarray:
    """Singular values of ``M`` in nonincreasing order.

    One-sided Jacobi on the q columns of the (normalised) matrix; the
    singular values are the column norms once the columns are orthogonal.
    """
    A = as_matrix(M)
    U = A.data.copy()
    _jacobi_columns(U)
    sv = np.sqrt(np.einsum("ij,ij->j", U, U))
    return np.sort(sv)[::-1]


def trace_powers(M, k: int) -> np.ndarray:
    """Return ``[tr((M^T M)^m) for m = 1..k]`` by powering the Gram matrix.

    Traces are accumulated with exactly rounded summation because U_k
    combinations subtract nearly equal large terms.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    A = as_matrix(M)
    G = A.data.T @ A.data
    P = G
    out = np.empty(k)
    for m in range(k):
        if m:
            P = P @ G
        out[m] = math.fsum(np.diagonal(P))
    return out


def schatten_norm(spec, s) -> float:
    """l_s norm of a spectrum; ``s = inf`` gives the largest value."""
    if s != math.inf and not s >= 1:
        raise ValueError(f"Schatten index must be >= 1 or inf, got {s}")
    sv = as_spectrum(spec)
    if sv.size == 0:
        return 0.0
    if s == math.inf:
        return float(sv[0])
    top = sv[0]
    if top == 0.0:
        return 0.0
    # factor out the top value so large s does not overflow
    return float(top * math.fsum((sv / top) ** s) ** (1.0 / s))


def read_csv_matrix(path_or_buffer) -> DenseMatrix:
    """Read a headerless comma separated matrix, one row per line."""
    if isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__"):
        with open(path_or_buffer, newline="") as fh:
            text = fh.read()
    else:
        text = path_or_buffer.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError("empty matrix file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InputError("ragged rows in matrix file")
    try:
        values = [[float(c) for c in r] for r in rows]
    except ValueError as exc:
        raise InputError(f"non-numeric entry: {exc}") from None
    return DenseMatrix.from_array(values)


def write_csv_matrix(M, path_or_buffer) -> None:
    """Write a matrix in the same headerless CSV layout (original orientation)."""
    if isinstance(M, DenseMatrix):
        data = M.data.T if M.transposed else M.data
    else:
        data = np.atleast_2d(np.asarray(M, dtype=float))
    lines = "\n".join(",".join(repr(float(v)) for v in row) for row in data) + "\n"
    if hasattr(path_or_buffer, "write"):
        path_or_buffer.write(lines)
    else:
        with open(path_or_buffer, "w") as fh:
            fh.write(lines)
