"""Synthetic benchmark distributions and their closed-form analytics.

Two families are built in:

* ``two_gaussian``: a mixture of two unit-variance Gaussians centered at
  (-offset, 0, ...) and (+offset, 0, ...), truncated so |x1| > gamma0.
  Labels start as sign(x1), are flipped deterministically on the band
  gamma0 < |x1| <= b, and flipped with probability p outside it.  The
  best halfspace is (1, 0, ...) and its error has a closed form in the
  normal CDF.
* ``absolute_boundary``: an isotropic 2D Gaussian labeled +1 below the
  curve x2 = b * |x1|.  The best halfspace error is 1/2 - arctan(1/b)/pi
  while the Bayes classifier is perfect.

Also provided: empirical estimators for the soft-margin function and the
sub-exponential tail parameter of arbitrary sample sets.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .normal import normal_cdf, normal_pdf, normal_quantile

TWO_GAUSSIAN = "two_gaussian_adversarial"
ABSOLUTE_BOUNDARY = "absolute_boundary"
CUSTOM = "custom_sampler"

_REJECTION_CAP = 10_000
_SAMPLES_MAGIC = b"HSSA"


class DistributionError(ValueError):
    """Invalid or infeasible distribution parameters."""


@dataclass(frozen=True)
class DistributionSpec:
    """Parameterized description of a benchmark distribution.

    For ``two_gaussian_adversarial``: requires b > gamma0 >= 0 and
    rcn_rate in [0, 1/2).  For ``absolute_boundary``: requires b > 0 and
    d = 2.  A ``custom_sampler`` takes (rng, n) -> (X, y).
    """

    kind: str
    gamma0: float = 0.0
    b: float = 1.0
    rcn_rate: float = 0.1
    cluster_offset: float = 3.0
    d: int = 2
    sampler: Callable | None = None

    def __post_init__(self):
        if self.kind == TWO_GAUSSIAN:
            if not (self.b > self.gamma0 >= 0.0):
                raise DistributionError(
                    f"two_gaussian requires b > gamma0 >= 0, got b={self.b}, gamma0={self.gamma0}")
            if not (0.0 <= self.rcn_rate < 0.5):
                raise DistributionError(f"rcn_rate must lie in [0, 1/2), got {self.rcn_rate}")
            if self.d < 2:
                raise DistributionError("two_gaussian requires d >= 2")
        elif self.kind == ABSOLUTE_BOUNDARY:
            if self.b <= 0.0:
                raise DistributionError(f"absolute_boundary requires b > 0, got {self.b}")
            if self.d != 2:
                raise DistributionError("absolute_boundary is a 2D construction")
        elif self.kind == CUSTOM:
            if self.sampler is None:
                raise DistributionError("custom_sampler spec needs a sampler callable")
        else:
            raise DistributionError(f"unknown distribution kind {self.kind!r}")

    def to_config(self) -> dict:
        if self.kind == CUSTOM:
            raise DistributionError("custom samplers do not serialize")
        out = {"kind": self.kind, "b": self.b, "d": self.d}
        if self.kind == TWO_GAUSSIAN:
            out.update(gamma0=self.gamma0, rcn_rate=self.rcn_rate,
                       cluster_offset=self.cluster_offset)
        return out

    @staticmethod
    def from_config(data: dict) -> "DistributionSpec":
        return DistributionSpec(**data)


@dataclass(frozen=True)
class AnalyticProfile:
    """Closed-form quantities attached to a distribution.

    ``subexp_norm`` has no closed form for the truncated mixture and is
    None there until filled from :func:`estimate_subexp_norm`.
    """

    opt_lin: float
    bayes_risk: float
    v_star: np.ndarray
    hard_margin: float | None = None
    subexp_norm: float | None = None
    anticoncentration: float | None = None

    def __post_init__(self):
        v = np.asarray(self.v_star, dtype=np.float64)
        object.__setattr__(self, "v_star", v)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise DistributionError("v_star must be a unit vector")
        if not (0.0 <= self.bayes_risk <= self.opt_lin <= 0.5 + 1e-12):
            raise DistributionError("expected 0 <= bayes_risk <= opt_lin <= 1/2")


# ---------------------------------------------------------------------------
# closed-form analytics


def _two_sided_tail(t: float, offset: float) -> float:
    """P(|Z| > t) for Z ~ N(offset, 1), t >= 0: both cluster sides count."""
    return normal_cdf(offset - t) + normal_cdf(-offset - t)


def opt_lin_two_gaussian(gamma0: float, b: float, p: float,
                         offset: float = 3.0) -> float:
    """Best-halfspace error for the truncated noisy mixture.

    The labels depend only on |x1|, so with G(t) = P(|N(c,1)| > t) the
    error of the first-coordinate halfspace is the band mass plus the
    residual flip mass: (G(gamma0) - (1 - p) * G(b)) / G(gamma0).  The
    second term of G covers the far cluster's mass across the origin
    (about 1e-3 at offset 3), which a one-sided approximation misses by
    more than the Monte-Carlo resolution at n = 1e6.
    """
    if b <= gamma0:
        raise DistributionError(f"requires b > gamma0, got b={b}, gamma0={gamma0}")
    denom = _two_sided_tail(gamma0, offset)
    return (denom - (1.0 - p) * _two_sided_tail(b, offset)) / denom


def bayes_risk_two_gaussian(gamma0: float, b: float, p: float,
                            offset: float = 3.0) -> float:
    """Bayes risk: only the randomly flipped region |x1| > b is lost."""
    if b <= gamma0:
        raise DistributionError(f"requires b > gamma0, got b={b}, gamma0={gamma0}")
    return p * _two_sided_tail(b, offset) / _two_sided_tail(gamma0, offset)


def boundary_from_opt(gamma0: float, p: float, opt: float,
                      offset: float = 3.0) -> float:
    """Boundary b making the best-halfspace error equal ``opt``.

    Inverts :func:`opt_lin_two_gaussian` by safeguarded Newton on the
    strictly decreasing two-sided tail; raises if no b > gamma0 achieves
    the requested error (i.e. opt is at or below the pure-RCN floor p).
    """
    if not (0.0 < opt < 1.0):
        raise DistributionError(f"opt must lie in (0, 1), got {opt}")
    denom = _two_sided_tail(gamma0, offset)
    target = (1.0 - opt) / (1.0 - p) * denom
    if not (0.0 < target < denom):
        raise DistributionError(
            f"opt={opt} is infeasible for gamma0={gamma0}, p={p}, offset={offset}"
            " (at or below the pure-RCN floor)")
    lo, hi = gamma0, offset + 45.0
    # One-sided quantile gives a starting point within ~1e-3.
    b = offset - normal_quantile(target) if target < 1.0 else lo
    if not (lo < b < hi):
        b = 0.5 * (lo + hi)
    for _ in range(100):
        f = _two_sided_tail(b, offset) - target
        if f > 0.0:
            lo = b
        else:
            hi = b
        df = -(normal_pdf(offset - b) + normal_pdf(offset + b))
        step = f / df if df != 0.0 else 0.0
        nxt = b - step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - b) <= 1e-15 * max(1.0, abs(b)):
            b = nxt
            break
        b = nxt
    return b


def opt_lin_absolute(b: float) -> float:
    """Best-halfspace error 1/2 - arctan(1/b)/pi for the V-shaped labels."""
    if b <= 0.0:
        raise DistributionError(f"requires b > 0, got {b}")
    return 0.5 - math.atan(1.0 / b) / math.pi


def absolute_boundary_from_opt(opt: float) -> float:
    """Inverse of :func:`opt_lin_absolute` on (0, 1/2)."""
    if not (0.0 < opt < 0.5):
        raise DistributionError(f"opt must lie in (0, 1/2), got {opt}")
    return math.tan(math.pi * opt)


def analytic_profile(spec: DistributionSpec) -> AnalyticProfile:
    """Closed-form profile for a built-in family."""
    if spec.kind == TWO_GAUSSIAN:
        v = np.zeros(spec.d)
        v[0] = 1.0
        return AnalyticProfile(
            opt_lin=opt_lin_two_gaussian(spec.gamma0, spec.b, spec.rcn_rate,
                                         spec.cluster_offset),
            bayes_risk=bayes_risk_two_gaussian(spec.gamma0, spec.b, spec.rcn_rate,
                                               spec.cluster_offset),
            v_star=v,
            hard_margin=spec.gamma0 if spec.gamma0 > 0 else None,
            subexp_norm=None,
        )
    if spec.kind == ABSOLUTE_BOUNDARY:
        # Best halfspace predicts +1 below the horizontal axis.  The
        # Gaussian marginal is 1-anti-concentrated; its exact
        # sub-exponential norm is sqrt(pi/2) (the small-t limit of
        # t / -log P(|z| >= t)).
        return AnalyticProfile(
            opt_lin=opt_lin_absolute(spec.b),
            bayes_risk=0.0,
            v_star=np.array([0.0, -1.0]),
            hard_margin=None,
            subexp_norm=math.sqrt(math.pi / 2.0),
            anticoncentration=1.0,
        )
    raise DistributionError(f"no analytic profile for kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# sampling


def bayes_predict(spec: DistributionSpec, X: np.ndarray) -> np.ndarray:
    """Labels of the Bayes-optimal classifier."""
    X = np.asarray(X, dtype=np.float64)
    if spec.kind == TWO_GAUSSIAN:
        x1 = X[:, 0]
        # The pre-RCN deterministic label: flipped sign(x1) on the band.
        band = np.abs(x1) <= spec.b
        y = np.sign(x1)
        y[band] = -y[band]
        return y.astype(np.int64)
    if spec.kind == ABSOLUTE_BOUNDARY:
        return np.where(X[:, 1] < spec.b * np.abs(X[:, 0]), 1, -1).astype(np.int64)
    raise DistributionError(f"no Bayes rule for kind {spec.kind!r}")


def _sample_two_gaussian(spec: DistributionSpec, rng: np.random.Generator,
                         n: int) -> tuple[np.ndarray, np.ndarray]:
    xs = []
    remaining = n
    for _ in range(_REJECTION_CAP):
        draw = rng.standard_normal((remaining, spec.d))
        side = np.where(rng.random(remaining) < 0.5, 1.0, -1.0)
        draw[:, 0] += side * spec.cluster_offset
        keep = draw[np.abs(draw[:, 0]) > spec.gamma0]
        if keep.size:
            xs.append(keep)
            remaining -= keep.shape[0]
        if remaining == 0:
            break
    else:
        raise DistributionError(
            "rejection sampling cap exhausted; the truncation removes almost all mass")
    X = np.concatenate(xs)[:n]
    x1 = X[:, 0]
    y = np.sign(x1)
    band = np.abs(x1) <= spec.b  # already |x1| > gamma0
    y[band] = -y[band]
    flips = (~band) & (rng.random(n) < spec.rcn_rate)
    y[flips] = -y[flips]
    return X, y.astype(np.int64)


def sample(spec: DistributionSpec, rng: np.random.Generator,
           n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw n labeled samples; returns (X of shape (n, d), y in {-1, +1})."""
    if n < 1:
        raise DistributionError(f"need n >= 1, got {n}")
    if spec.kind == TWO_GAUSSIAN:
        return _sample_two_gaussian(spec, rng, n)
    if spec.kind == ABSOLUTE_BOUNDARY:
        X = rng.standard_normal((n, 2))
        y = np.where(X[:, 1] < spec.b * np.abs(X[:, 0]), 1, -1).astype(np.int64)
        return X, y
    if spec.kind == CUSTOM:
        X, y = spec.sampler(rng, n)
        return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64)
    raise DistributionError(f"unknown distribution kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# empirical estimators


def estimate_soft_margin(X: np.ndarray, v: np.ndarray,
                         gamma_grid) -> dict[float, float]:
    """Empirical frequency of |<v, x>| <= gamma per grid point."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise DistributionError("empty sample set")
    v = np.asarray(v, dtype=np.float64)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise DistributionError("direction must be a unit vector")
    proj = np.abs(X @ v)
    return {float(g): float(np.mean(proj <= g)) for g in gamma_grid}


# Tail levels for the sub-exponential fit.  Levels close to 1 are
# excluded: a marginal bounded away from zero has tail exactly 1 there
# and no finite parameter can satisfy the bound.
_TAIL_LEVELS = (0.9, 0.75, 0.5, 0.25, 0.1, 0.05, 0.01, 1e-3, 1e-4)


def estimate_subexp_norm(X: np.ndarray, rng: np.random.Generator | None = None,
                         n_directions: int = 64, c_grid=None) -> float:
    """Smallest grid value C with tail(t) <= exp(-t/C) across directions.

    Directions are ``n_directions`` random unit vectors plus the
    coordinate axes; thresholds are the empirical quantiles at fixed tail
    levels.  Returns inf when no grid value works (heavy tails).
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 10_000:
        raise DistributionError(f"need at least 1e4 samples, got {n}")
    if rng is None:
        rng = np.random.default_rng(0)
    if c_grid is None:
        c_grid = np.geomspace(0.05, 50.0, 50)
    dirs = rng.standard_normal((n_directions, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = np.concatenate([dirs, np.eye(d)])
    # Feasibility constraint per (direction, level): C >= t / -log(level).
    c_required = 0.0
    for v in dirs:
        proj = np.abs(X @ v)
        thresholds = np.quantile(proj, [1.0 - lv for lv in _TAIL_LEVELS])
        for lv, t in zip(_TAIL_LEVELS, thresholds):
            if t <= 0.0:
                continue
            emp = float(np.mean(proj >= t))
            if emp <= 0.0:
                continue
            c_required = max(c_required, t / -math.log(emp))
    feasible = [float(c) for c in c_grid if c >= c_required]
    return min(feasible) if feasible else math.inf


# ---------------------------------------------------------------------------
# sample-set export


def samples_to_csv(X: np.ndarray, y: np.ndarray) -> str:
    """CSV with header x1,...,xd,y."""
    X = np.asarray(X, dtype=np.float64)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(X.shape[1])] + ["y"])
    for row, label in zip(X, y):
        writer.writerow([repr(float(v)) for v in row] + [int(label)])
    return buf.getvalue()


def samples_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    d = len(header) - 1
    X = np.array([[float(v) for v in row[:d]] for row in body])
    y = np.array([int(row[d]) for row in body], dtype=np.int64)
    return X, y


def samples_to_bytes(X: np.ndarray, y: np.ndarray) -> bytes:
    X = np.asarray(X, dtype=np.float64)
    buf = io.BytesIO()
    buf.write(_SAMPLES_MAGIC)
    buf.write(struct.pack("<qq", X.shape[0], X.shape[1]))
    buf.write(X.astype("<f8").tobytes())
    buf.write(np.asarray(y, dtype=np.int8).tobytes())
    return buf.getvalue()


def samples_from_bytes(raw: bytes) -> tuple[np.ndarray, np.ndarray]:
    buf = io.BytesIO(raw)
    if buf.read(4) != _SAMPLES_MAGIC:
        raise DistributionError("bad magic in sample file")
    n, d = struct.unpack("<qq", buf.read(16))
    X = np.frombuffer(buf.read(8 * n * d), dtype="<f8").astype(np.float64).reshape(n, d)
    y = np.frombuffer(buf.read(n), dtype=np.int8).astype(np.int64)
    return X, y
