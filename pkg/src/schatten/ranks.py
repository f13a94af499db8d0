"""Effective-rank indices of a spectrum and the noisy estimator of ER_{2,inf}."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError
from .linalg import as_matrix, as_spectrum, svd_values


@dataclass(frozen=True)
class EffectiveRankReport:
    er_1_inf: float
    er_2_inf: float
    er_shannon: float
    er_1_s: float
    er_2_s: float
    s: float

    def to_json(self):
        return asdict(self)


def _weights(w):
    # filter after dividing: tiny entries can underflow to 0 (0 log 0 = 0)
    pi = w / math.fsum(w)
    return pi[pi > 0]


def _hill(w, s):
    # (sum pi^s)^(1/(1-s)) with pi = w / sum(w); zeros drop out for s > 0
    pi = _weights(w)
    return math.fsum(pi**s) ** (1.0 / (1.0 - s))


def _shannon(w):
    pi = _weights(w)
    return math.exp(-math.fsum(pi * np.log(pi)))


def effective_ranks(spec, s: float) -> EffectiveRankReport:
    """ER_{1,inf} = |a|_1/|a|_inf, ER_{2,inf} = |a|_2^2/|a|_inf^2, exp(Shannon)
    of a/|a|_1, and Hill numbers of order s on a and on a**2."""
    if not s > 0 or s == 1 or math.isinf(s):
        raise ValueError("s must be positive, finite and different from 1")
    sv = as_spectrum(spec)
    if sv.size == 0 or sv[0] == 0:
        raise InputError("effective ranks need at least one positive singular value")
    sv = sv / sv[0]
    sq = sv * sv
    return EffectiveRankReport(
        er_1_inf=math.fsum(sv),
        er_2_inf=math.fsum(sq),
        er_shannon=_shannon(sv),
        er_1_s=_hill(sv, s),
        er_2_s=_hill(sq, s),
        s=float(s),
    )


def estimate_er2inf(Y) -> float:
    """max(tr(Y'Y - pI) / |Y'Y - pI|_op, 1); a zero denominator gives 1."""
    Mx = as_matrix(Y)
    num = math.fsum((Mx.data * Mx.data).ravel()) - Mx.p * Mx.q
    den = float(np.max(np.abs(svd_values(Mx) ** 2 - Mx.p)))
    if den <= 1e-12 * Mx.p:
        return 1.0
    return max(num / den, 1.0)
