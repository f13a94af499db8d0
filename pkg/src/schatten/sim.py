"""Monte-Carlo risk experiments.

Every random draw comes from a Philox counter generator keyed by
(seed, p, q, replicate, stream), so a replicate can be replayed alone and
cells could run in any order without changing a single bit of the report.
Streams: 0 noise, 1 signal spectrum, 2 signal rotation.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .debias import get_plan
from .errors import ConfigurationError
from .linalg import DenseMatrix, as_spectrum, schatten_norm
from .ranks import effective_ranks

NOISE_FAMILIES = ("gaussian", "rademacher", "uniform")
SPECTRUM_LAWS = ("zero", "constant", "uniform", "explicit")
NORM_ESTIMATORS = ("frobenius", "operator", "even", "plugin", "naive", "poly")
SPECTRUM_ESTIMATORS = ("spectrum_lp", "spectrum_plugin")
ESTIMATORS = NORM_ESTIMATORS + ("er2inf",) + SPECTRUM_ESTIMATORS

STREAM_NOISE, STREAM_SIGNAL, STREAM_ROTATION = 0, 1, 2


def substream(seed: int, p: int, q: int, r: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, p, q, r, stream])))


def _uniforms(rng, n):
    return rng.random(n)


def _box_muller(rng, n):
    m = (n + 1) // 2
    u1 = 1.0 - _uniforms(rng, m)  # (0, 1], keeps log finite
    u2 = _uniforms(rng, m)
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])
    return z[:n]


def generate_noise(p: int, q: int, family: str, seed=0, rng=None) -> np.ndarray:
    """p x q iid unit-variance noise: standard normal, +-1 or Uniform[-sqrt3, sqrt3]."""
    if family not in NOISE_FAMILIES:
        raise ValueError(f"unknown noise family {family!r}; expected one of {NOISE_FAMILIES}")
    rng = rng if rng is not None else substream(seed, p, q, 0, STREAM_NOISE)
    n = p * q
    if family == "gaussian":
        e = _box_muller(rng, n)
    elif family == "rademacher":
        e = np.where(_uniforms(rng, n) < 0.5, -1.0, 1.0)
    else:
        e = math.sqrt(3.0) * (2.0 * _uniforms(rng, n) - 1.0)
    return e.reshape(p, q)


def _haar(rng, n):
    # QR of a Gaussian matrix with the sign fix gives a Haar orthogonal matrix
    Z = _box_muller(rng, n * n).reshape(n, n)
    Qm, R = np.linalg.qr(Z)
    return Qm * np.sign(np.diag(R))


def generate_signal(p: int, q: int, spectrum, seed=0, rotate: bool = False, rng=None) -> np.ndarray:
    """Diagonal embedding of ``spectrum`` in a p x q matrix, or U D V^T with
    Haar factors when ``rotate`` is set."""
    sv = np.asarray(spectrum, dtype=float)
    if sv.shape != (q,):
        raise ValueError(f"spectrum must have length q = {q}")
    if p < q:
        raise ValueError("signal generator expects p >= q")
    A = np.zeros((p, q))
    A[np.arange(q), np.arange(q)] = sv
    if rotate:
        rng = rng if rng is not None else substream(seed, p, q, 0, STREAM_ROTATION)
        A = _haar(rng, p) @ A @ _haar(rng, q).T
    return A


@dataclass
class SignalSpec:
    law: str = "zero"
    rank: int | None = None
    scale: float = 0.0
    scale_units: str = "absolute"  # or "pq": scale multiplies (pq)^(1/4)
    values: list | None = None
    rotate: bool = False

    def draw(self, p, q, rng):
        r = q if self.rank is None else min(self.rank, q)
        unit = (p * q) ** 0.25 if self.scale_units == "pq" else 1.0
        sv = np.zeros(q)
        if self.law == "constant":
            sv[:r] = self.scale * unit
        elif self.law == "uniform":
            sv[:r] = _uniforms(rng, r) * self.scale * unit
        elif self.law == "explicit":
            vals = np.asarray(self.values or [], dtype=float)
            if len(vals) > q:
                raise ConfigurationError("explicit spectrum longer than q")
            sv[: len(vals)] = vals * unit
        return as_spectrum(sv)


@dataclass
class ExperimentConfig:
    estimator: str
    grid: list
    replicates: int
    seed: int = 0
    noise: str = "gaussian"
    noise_scale: float = 1.0
    signal: SignalSpec = field(default_factory=SignalSpec)
    s: float | None = None
    k: int | None = None
    M: float | None = None
    K: int | None = None

    def __post_init__(self):
        if isinstance(self.signal, dict):
            self.signal = SignalSpec(**self.signal)
        self.grid = [tuple(int(v) for v in cell) for cell in self.grid]
        if self.estimator not in ESTIMATORS:
            raise ConfigurationError(f"unknown estimator {self.estimator!r}")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if self.noise not in NOISE_FAMILIES:
            raise ConfigurationError(f"unknown noise family {self.noise!r}")
        if self.signal.law not in SPECTRUM_LAWS:
            raise ConfigurationError(f"unknown spectrum law {self.signal.law!r}")
        if self.signal.scale_units not in ("absolute", "pq"):
            raise ConfigurationError("scale_units must be 'absolute' or 'pq'")
        if any(p < 1 or q < 1 for p, q in self.grid):
            raise ConfigurationError("grid dimensions must be positive")
        if self.estimator in ("plugin", "naive", "poly") and self.s is None:
            raise ConfigurationError(f"estimator {self.estimator!r} needs s")

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        return cls(**obj)

    def to_json(self):
        out = asdict(self)
        out["grid"] = [list(c) for c in self.grid]
        return out


def _norm_index(cfg):
    if cfg.estimator == "frobenius":
        return 2.0
    if cfg.estimator == "operator":
        return math.inf
    if cfg.estimator == "even":
        if cfg.k is None and cfg.s is None:
            raise ConfigurationError("estimator 'even' needs k or s")
        return float(2 * cfg.k) if cfg.k is not None else float(cfg.s)
    return float(cfg.s)


def _estimate_and_truth(cfg, Y, sv, plans):
    from . import estimators as est
    from .spectrum import plugin_spectrum, recover_spectrum

    if cfg.estimator in SPECTRUM_ESTIMATORS:
        if cfg.estimator == "spectrum_lp":
            hat = recover_spectrum(Y, M=cfg.M or est.DEFAULT_M, K=cfg.K, plans=plans).sigma_hat
        else:
            hat = plugin_spectrum(Y)
        return math.fsum(np.abs(hat - sv)), 0.0
    if cfg.estimator == "er2inf":
        from .ranks import estimate_er2inf
        truth = effective_ranks(sv, 2.0).er_2_inf if sv[0] > 0 else 1.0
        return estimate_er2inf(Y), truth
    truth = schatten_norm(sv, _norm_index(cfg))
    s = _norm_index(cfg)
    if cfg.estimator == "frobenius":
        val = est.estimate_frobenius(Y)
    elif cfg.estimator == "operator":
        val = est.estimate_operator(Y)
    elif cfg.estimator == "even":
        k = cfg.k if cfg.k is not None else int(s) // 2
        val = est.estimate_even_schatten(Y, k, get_plan(k, plans))
    elif cfg.estimator == "plugin":
        val = est.estimate_plugin_Ts(Y, s)
    elif cfg.estimator == "naive":
        val = est.estimate_naive(Y, s)
    else:
        val = est.estimate_poly_schatten(Y, s, M=cfg.M or est.DEFAULT_M, K=cfg.K, plans=plans)
    return val, truth


def draw_replicate(cfg: ExperimentConfig, p: int, q: int, r: int):
    """Observation Y and true spectrum for replicate r of cell (p, q)."""
    sv = cfg.signal.draw(p, q, substream(cfg.seed, p, q, r, STREAM_SIGNAL))
    A = generate_signal(p, q, sv, rotate=cfg.signal.rotate,
                        rng=substream(cfg.seed, p, q, r, STREAM_ROTATION))
    E = generate_noise(p, q, cfg.noise, rng=substream(cfg.seed, p, q, r, STREAM_NOISE))
    return DenseMatrix(A + cfg.noise_scale * E), sv


@dataclass
class CellResult:
    p: int
    q: int
    estimator: str
    mean_abs_err: float
    se: float
    n: int
    mean_estimate: float
    mean_truth: float
    seeds_digest: str


@dataclass
class RiskReport:
    config: dict
    cells: list
    slope: dict | None

    def to_json_text(self) -> str:
        body = {"config": self.config, "cells": [asdict(c) for c in self.cells], "slope": self.slope}
        return json.dumps(body, sort_keys=True, indent=2) + "\n"

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "q", "estimator", "mean_abs_err", "se", "n"])
        for c in self.cells:
            w.writerow([c.p, c.q, c.estimator, repr(c.mean_abs_err), repr(c.se), c.n])
        return buf.getvalue()


def fit_slope(x, y, level: float = 0.95):
    """OLS slope of y on x with a two-sided t confidence band."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 2 or np.ptp(x) == 0:
        return None
    res = stats.linregress(x, y)
    out = {"slope": float(res.slope), "intercept": float(res.intercept), "n_points": n,
           "stderr": None, "band": None, "level": level}
    if n > 2:
        half = float(stats.t.ppf(0.5 + level / 2, n - 2) * res.stderr)
        out.update(stderr=float(res.stderr), band=[float(res.slope) - half, float(res.slope) + half])
    return out


def run_risk_experiment(cfg: ExperimentConfig, plans=None) -> RiskReport:
    cells = []
    for p, q in cfg.grid:
        if p < q:
            raise ConfigurationError(f"grid cell ({p}, {q}) violates p >= q")
        errs, ests, truths = [], [], []
        digest = hashlib.sha256()
        for r in range(cfg.replicates):
            digest.update(np.random.SeedSequence([cfg.seed, p, q, r]).generate_state(4).tobytes())
            Y, sv = draw_replicate(cfg, p, q, r)
            val, truth = _estimate_and_truth(cfg, Y, sv, plans)
            errs.append(abs(val - truth))
            ests.append(val)
            truths.append(truth)
        n = cfg.replicates
        mean = math.fsum(errs) / n
        se = math.sqrt(math.fsum((e - mean) ** 2 for e in errs) / (n - 1) / n) if n > 1 else 0.0
        cells.append(CellResult(p, q, cfg.estimator, mean, se, n,
                                math.fsum(ests) / n, math.fsum(truths) / n, digest.hexdigest()))
    pos = [c for c in cells if c.mean_abs_err > 0]
    slope = fit_slope([math.log(c.p * c.q) for c in pos], [math.log(c.mean_abs_err) for c in pos])
    if slope is not None:
        slope["x"] = "log(pq)"
    return RiskReport(cfg.to_json(), cells, slope)
