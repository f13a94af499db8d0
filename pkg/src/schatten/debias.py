"""Unbiased estimators U_k of ||A||_{2k}^{2k} under Gaussian noise.

U_k is a combination of trace powers T_s = prod_i tr((Y^T Y)^{s_i}) with
coefficients that are polynomials in (p, q). The coefficients are derived
here rather than tabulated:

1. ``wick_expectation`` gives E[T_s] in the power sums P_j = tr((A^T A)^j).
   Each Y entry along the closed walk is either A or E; E entries are paired
   by Isserlis' theorem, pairing merges row/column indices, and the free
   index classes left over contribute factors p or q.
2. ``derive_debias_plan`` evaluates those expectations on an integer grid of
   (p, q), fits every coefficient by exact bivariate interpolation with a
   held-out check, then strips the bias from tr((Y^T Y)^k) one power-sum
   term at a time, highest weight first.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import tempfile
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import CapacityError, ConfigurationError, DegreeBoundError, InputError
from .linalg import as_matrix
from .polys import hermite_table

MAX_K = 5
WALK_GUARD = 10**9
HERMITE_GUARD = 10**8


# ---------------------------------------------------------------------------
# bivariate polynomials with rational coefficients


class BiPoly:
    """Polynomial in (p, q) stored as ``{(dp, dq): Fraction}``."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        for key, c in (terms or {}).items():
            c = Fraction(c)
            if c:
                self.terms[tuple(key)] = c

    @classmethod
    def const(cls, c):
        return cls({(0, 0): c})

    def __add__(self, other):
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, 0) + c
        return BiPoly(out)

    def __neg__(self):
        return BiPoly({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, BiPoly):
            return BiPoly({k: c * other for k, c in self.terms.items()})
        out = defaultdict(Fraction)
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                out[(a1 + a2, b1 + b2)] += c1 * c2
        return BiPoly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, BiPoly):
            other = BiPoly.const(other)
        return self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for (a, b), c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(x for x in (f"p^{a}" if a else "", f"q^{b}" if b else "") if x)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    def __call__(self, p, q):
        return sum((c * Fraction(p) ** a * Fraction(q) ** b for (a, b), c in self.terms.items()),
                   Fraction(0))

    @property
    def degree(self):
        return max((a + b for a, b in self.terms), default=-1)

    def to_json(self):
        return [[a, b, c.numerator, c.denominator] for (a, b), c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, rows):
        return cls({(a, b): Fraction(n, d) for a, b, n, d in rows})


P = BiPoly({(1, 0): 1})
Q = BiPoly({(0, 1): 1})


# ---------------------------------------------------------------------------
# Wick calculus for E[prod tr((Y^T Y)^{s_i})], A diagonal


def _check_partition(partition):
    part = tuple(int(x) for x in partition)
    if any(x < 1 for x in part):
        raise InputError(f"partition entries must be positive: {partition}")
    return tuple(sorted(part))


def _walk_edges(partition):
    """Edges (row vertex, column vertex) of the closed walks of T_s.

    tr((Y^T Y)^L) = sum prod_t Y[i_t, j_t] Y[i_t, j_{t+1}], j_{L+1} = j_1.
    """
    edges = []
    off = 0
    for L in partition:
        for t in range(L):
            edges.append((off + t, off + t))
            edges.append((off + t, off + (t + 1) % L))
        off += L
    return edges, off


def _matchings(n):
    """All partial perfect matchings of range(n): (pairs, unmatched)."""

    def rec(rest):
        if not rest:
            yield (), ()
            return
        head, tail = rest[0], rest[1:]
        for pairs, free in rec(tail):
            yield pairs, (head,) + free
        for idx, other in enumerate(tail):
            for pairs, free in rec(tail[:idx] + tail[idx + 1:]):
                yield ((head, other),) + pairs, free

    yield from rec(tuple(range(n)))


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def _union(parent, a, b):
    ra, rb = _find(parent, a), _find(parent, b)
    if ra != rb:
        parent[rb] = ra


@lru_cache(maxsize=None)
def wick_expectation_symbolic(partition) -> dict:
    """E[T_s] as ``{power-sum partition: BiPoly in (p, q)}``.

    A is taken diagonal (the expectation is orthogonally invariant). For
    every choice of which edges carry noise and every Gaussian pairing of
    those edges, row indices of paired edges merge, as do column indices.
    An A edge forces its row and column class to share one value v <= q and
    contributes sigma_v; a connected cluster with 2m A edges sums to P_m.
    A class touched by no A edge is free and contributes p (row) or q
    (column).
    """
    part = _check_partition(partition)
    if not part:
        return {(): BiPoly.const(1)}
    edges, nv = _walk_edges(part)
    counts = Counter()
    for pairs, a_edges in _matchings(len(edges)):
        row = list(range(nv))
        col = list(range(nv))
        for e1, e2 in pairs:
            _union(row, edges[e1][0], edges[e2][0])
            _union(col, edges[e1][1], edges[e2][1])
        # cluster graph over classes: rows are 0..nv-1, columns nv..2nv-1
        node = list(range(2 * nv))
        for e in a_edges:
            r, c = edges[e]
            _union(node, _find(row, r), nv + _find(col, c))
        weight = Counter()
        for e in a_edges:
            weight[_find(node, _find(row, edges[e][0]))] += 1
        touched = set(weight)
        free_rows = sum(1 for r in {_find(row, v) for v in range(nv)}
                        if _find(node, r) not in touched)
        free_cols = sum(1 for c in {_find(col, v) for v in range(nv)}
                        if _find(node, nv + c) not in touched)
        if any(w % 2 for w in weight.values()):  # cannot happen: clusters are Eulerian bipartite
            raise ArithmeticError("odd A-cluster in Wick contraction")
        ps = tuple(sorted(w // 2 for w in weight.values()))
        counts[(ps, free_rows, free_cols)] += 1
    out = defaultdict(BiPoly)
    for (ps, a, b), n in counts.items():
        out[ps] = out[ps] + BiPoly({(a, b): n})
    return dict(out)


def wick_expectation(partition, p: int, q: int) -> dict:
    """E[T_s] at numeric (p, q) as ``{power-sum partition: Fraction}``."""
    if p < 1 or q < 1:
        raise InputError("p and q must be positive")
    return {ps: poly(p, q) for ps, poly in wick_expectation_symbolic(_check_partition(partition)).items()}


def _gauss_moment(m):
    return 0 if m % 2 else math.prod(range(m - 1, 0, -2))


def walk_expectation(partition, sigma, p: int) -> Fraction:
    """Brute-force E[T_s] for a numeric diagonal A = diag(sigma) embedded in p x q.

    Enumerates every index walk and uses E[(a + Z)^n] entrywise. Oracle only.
    """
    part = _check_partition(partition)
    sigma = [Fraction(s) for s in sigma]
    q = len(sigma)
    total_len = sum(part)
    if (p * q) ** total_len > WALK_GUARD:
        raise CapacityError(f"(pq)^{total_len} index walks exceed the enumeration guard")
    moments = {}

    def entry_moment(r, c, n):
        a = sigma[r] if r == c else Fraction(0)
        key = (a, n)
        if key not in moments:
            moments[key] = sum(math.comb(n, m) * a ** (n - m) * _gauss_moment(m)
                               for m in range(0, n + 1, 2))
        return moments[key]

    edges, nv = _walk_edges(part)
    total = Fraction(0)
    for rows in itertools.product(range(p), repeat=nv):
        for cols in itertools.product(range(q), repeat=nv):
            mono = Counter((rows[r], cols[c]) for r, c in edges)
            val = Fraction(1)
            for (r, c), n in mono.items():
                val *= entry_moment(r, c, n)
                if not val:
                    break
            total += val
    return total


def power_sum_value(ps, sigma) -> Fraction:
    sq = [Fraction(s) ** 2 for s in sigma]
    return math.prod((sum(x**j for x in sq) for j in ps), start=Fraction(1))


# ---------------------------------------------------------------------------
# debiasing plans


def _partitions(n, max_part=None):
    """Integer partitions of n as nondecreasing tuples."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in _partitions(n - first, first):
            yield rest + (first,)


def partitions_upto(l: int):
    """Every partition of weight 0..l, weight ascending."""
    out = []
    for w in range(l + 1):
        out.extend(sorted(_partitions(w)))
    return out


@dataclass
class DebiasPlan:
    """U_k = tr((Y^T Y)^k) + sum_s alpha_s(p, q) prod_i tr((Y^T Y)^{s_i}).

    ``alpha`` maps partitions of weight < k (the empty tuple is the
    constant) to polynomials in (p, q).
    """

    k: int
    alpha: dict = field(default_factory=dict)

    def coefficients(self, p, q) -> dict:
        return {s: poly(p, q) for s, poly in self.alpha.items()}

    def to_json(self):
        return {"k": self.k,
                "alpha": [{"partition": list(s), "poly": poly.to_json()}
                          for s, poly in sorted(self.alpha.items(), key=lambda kv: (sum(kv[0]), kv[0]))]}

    @classmethod
    def from_json(cls, obj):
        alpha = {tuple(item["partition"]): BiPoly.from_json(item["poly"]) for item in obj["alpha"]}
        plan = cls(int(obj["k"]), {s: c for s, c in alpha.items() if c})
        for s in plan.alpha:
            if sum(s) >= plan.k or list(s) != sorted(s):
                raise InputError(f"invalid partition {s} in plan for k={plan.k}")
        return plan

    def __eq__(self, other):
        return isinstance(other, DebiasPlan) and self.k == other.k and \
            {s: c for s, c in self.alpha.items() if c} == {s: c for s, c in other.alpha.items() if c}


def _grid(k):
    pts = []
    for q in range(k + 1, 2 * k + 5):
        for p in range(q, q + k + 4):
            pts.append((p, q))
    return pts


def _degree_bound(s, t):
    """Degree in (p, q) allowed for the coefficient of P_t in E[T_s].

    Each unit of weight lost to noise pairings can free one index class and
    each walk adds one more; checked against held-out points, not assumed.
    """
    return (sum(s) - sum(t)) + (len(s) - len(t))


def _monomials(D):
    return [(a, b) for a in range(D + 1) for b in range(D + 1 - a)]


def _exact_fit(points, values, D):
    """Solve for coefficient vectors of degree <= D fitting every column of values.

    Gaussian elimination over the rationals on the overdetermined system;
    an inconsistent row or a rank defect raises DegreeBoundError.
    """
    monos = _monomials(D)
    m = len(monos)
    ncol = len(values[0])
    rows = [[Fraction(p) ** a * Fraction(q) ** b for a, b in monos] + [Fraction(v) for v in vals]
            for (p, q), vals in zip(points, values)]
    piv_cols = []
    r = 0
    for c in range(m):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            raise DegreeBoundError(f"interpolation grid is not unisolvent for degree {D}")
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        piv_cols.append(c)
        r += 1
    for i in range(r, len(rows)):
        if any(x != 0 for x in rows[i][m:]):
            raise DegreeBoundError(f"training residual nonzero at degree bound {D}")
    sols = []
    for j in range(ncol):
        sols.append(BiPoly({monos[c]: rows[i][m + j] for i, c in enumerate(piv_cols)}))
    return sols


def _needed_expectations(k):
    return [(k,)] + [s for s in partitions_upto(k - 1) if s]


def interpolate_expectations(k: int) -> dict:
    """Fit E[T_s] coefficients for every T_s entering U_k as polynomials.

    Returns ``{s: {t: BiPoly}}``. Expectations come from
    ``wick_expectation`` at integer (p, q) only.
    """
    grid = _grid(k)
    held = [grid[-1], grid[len(grid) // 2], grid[1]]
    train = [pt for pt in grid if pt not in held]
    sources = _needed_expectations(k)
    numeric = {pt: {s: wick_expectation(s, *pt) for s in sources} for pt in grid}
    jobs = defaultdict(list)
    for s in sources:
        targets = set()
        for pt in grid:
            targets.update(numeric[pt][s])
        for t in sorted(targets):
            jobs[_degree_bound(s, t)].append((s, t))
    fitted = defaultdict(dict)
    for D, items in sorted(jobs.items()):
        if D < 0:
            raise DegreeBoundError(f"negative degree bound for {items[0]}")
        values = [[numeric[pt][s].get(t, 0) for s, t in items] for pt in train]
        for (s, t), poly in zip(items, _exact_fit(train, values, D)):
            for pt in held:
                if poly(*pt) != numeric[pt][s].get(t, 0):
                    raise DegreeBoundError(
                        f"held-out residual for coefficient of P{t} in E[T{s}] at (p,q)={pt}")
            fitted[s][t] = poly
    return dict(fitted)


def _debias(k, expectations):
    residual = {t: c for t, c in expectations[(k,)].items() if t != (k,) and c}
    if expectations[(k,)].get((k,)) != BiPoly.const(1):
        raise ArithmeticError("leading power sum must have unit coefficient")
    alpha = {}
    order = sorted((t for t in partitions_upto(k - 1)), key=lambda t: (-sum(t), t))
    for t in order:
        c = residual.pop(t, None)
        if not c:
            continue
        a = -c
        alpha[t] = a
        for u, coef in (expectations[t].items() if t else [((), BiPoly.const(1))]):
            if u == t:
                continue
            residual[u] = residual.get(u, BiPoly()) + a * coef
    if any(residual.values()):
        raise ArithmeticError(f"bias not cancelled: {residual}")
    return DebiasPlan(k, alpha)


def derive_debias_plan(k: int, method: str = "interpolate") -> DebiasPlan:
    """Coefficients alpha_s of U_k as exact polynomials in (p, q).

    ``method="interpolate"`` follows the grid route; ``"symbolic"`` reads the
    (p, q) polynomials straight from the contraction and serves as a
    cross-check.
    """
    if not 1 <= k <= MAX_K:
        raise ValueError(f"k must lie in [1, {MAX_K}]")
    if method == "interpolate":
        expectations = interpolate_expectations(k)
    elif method == "symbolic":
        expectations = {s: wick_expectation_symbolic(s) for s in _needed_expectations(k)}
    else:
        raise ValueError(f"unknown derivation method {method!r}")
    return _debias(k, expectations)


def plan_bias(plan: DebiasPlan) -> dict:
    """E[U_k] - ||A||_{2k}^{2k} in power sums, as exact polynomials.

    An unbiased plan gives an empty dict.
    """
    total = defaultdict(BiPoly)
    for s, coef in [((plan.k,), BiPoly.const(1))] + list(plan.alpha.items()):
        for t, c in wick_expectation_symbolic(s).items():
            total[t] = total[t] + coef * c
    total[(plan.k,)] = total[(plan.k,)] - BiPoly.const(1)
    return {t: c for t, c in total.items() if c}


def _anchor_plans():
    one = BiPoly.const(1)
    return {
        1: DebiasPlan(1, {(): -(P * Q)}),
        2: DebiasPlan(2, {(1,): -2 * (P + Q + one), (): P * Q * (one + P + Q)}),
        3: DebiasPlan(3, {(2,): -3 * (P + Q + one),
                          (1,): 3 * (P * P + Q * Q + P * Q + P + Q - 2 * one),
                          (): P * Q * (5 * one - P * P - Q * Q)}),
    }


REFERENCE_PLANS = _anchor_plans()


@lru_cache(maxsize=None)
def _derived(k):
    return derive_debias_plan(k)


def get_plan(k: int, plans=None) -> DebiasPlan:
    """Plan for U_k from ``plans`` (mapping k -> plan) or derived on demand."""
    if plans is not None:
        try:
            plan = plans[k]
        except KeyError:
            raise ConfigurationError(f"no debiasing plan for k={k}") from None
        if plan.k != k:
            raise ConfigurationError(f"plan stored under k={k} is for k={plan.k}")
        return plan
    return _derived(k)


def save_plans(plans, path) -> None:
    """Write plans as a JSON list, atomically (temp file then rename)."""
    items = [plans[k].to_json() for k in sorted(plans)] if isinstance(plans, dict) \
        else [p.to_json() for p in plans]
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".plans-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(items, fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_plans(path) -> dict:
    """Read a cache written by :func:`save_plans` (or a single plan object)."""
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, dict):
        obj = [obj]
    plans = {}
    for item in obj:
        plan = DebiasPlan.from_json(item)
        plans[plan.k] = plan
    return plans


# ---------------------------------------------------------------------------
# evaluation


def evaluate_U_k(traces, plan: DebiasPlan, p: int, q: int):
    """U_k from trace powers ``traces[m-1] = tr((Y^T Y)^m)``.

    ``traces`` may carry leading batch axes. Coefficients are evaluated in
    exact arithmetic, then terms are accumulated with Neumaier compensation.
    """
    tr = np.asarray(traces, dtype=float)
    if tr.shape[-1] < plan.k:
        raise ConfigurationError(f"need {plan.k} trace powers, got {tr.shape[-1]}")
    terms = [tr[..., plan.k - 1]]
    for s, coef in sorted(plan.coefficients(p, q).items()):
        prod = np.full(tr.shape[:-1], float(coef))
        for si in s:
            prod = prod * tr[..., si - 1]
        terms.append(prod)
    total = np.zeros(tr.shape[:-1])
    comp = np.zeros(tr.shape[:-1])
    for t in terms:
        new = total + t
        comp += np.where(np.abs(total) >= np.abs(t), (total - new) + t, (t - new) + total)
        total = new
    out = total + comp
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=16)
def _hermite_counts(p, q, k):
    """Multiplicity N_rs(i, j) for every (i, j) in [p]^k x [q]^k, flattened r*q+s."""
    i = np.array(list(itertools.product(range(p), repeat=k)), dtype=np.int64)
    j = np.array(list(itertools.product(range(q), repeat=k)), dtype=np.int64)
    ii = np.repeat(i, len(j), axis=0)
    jj = np.tile(j, (len(i), 1))
    first = ii * q + jj
    second = ii * q + np.roll(jj, -1, axis=1)
    flat = np.concatenate([first, second], axis=1)
    counts = np.zeros((len(flat), p * q), dtype=np.int8)
    rows = np.repeat(np.arange(len(flat)), 2 * k)
    np.add.at(counts, (rows, flat.ravel()), 1)
    counts.setflags(write=False)
    return counts


def hermite_direct_U_k(Y, k: int) -> float:
    """U_k straight from its Hermite definition (sum over all index walks).

    sum_{i in [p]^k, j in [q]^k} prod_{r,s} He_{N_rs(i,j)}(Y_rs); exponential
    cost, intended as an oracle on tiny matrices.
    """
    M = as_matrix(Y)
    p, q = M.p, M.q
    if k < 1:
        raise ValueError("k must be a positive integer")
    if (p * q) ** k > HERMITE_GUARD:
        raise CapacityError(f"(pq)^k = {(p * q) ** k} exceeds the Hermite oracle guard")
    counts = _hermite_counts(p, q, k)
    table = hermite_table(M.data.ravel(), 2 * k)
    vals = table[counts, np.arange(p * q)]
    return math.fsum(np.prod(vals, axis=1))
