"""Comparator construction, per-sample penalty, and inequality verifiers.

The central objects: the rank-one comparator matrix V with rows
sgn(a_j) * v_star / sqrt(m) (unit Frobenius norm), the per-sample
penalty

    xi(gamma) = 1{y <v*, x> in [0, gamma)}
              + (1 + |<v*, x>| / gamma) * 1{y <v*, x> < 0},

and the correlation lower bound

    y <grad_W f(x), V> >= a * gamma * sqrt(m) * (alpha - xi(gamma))

for the bias-free leaky-ReLU network, plus its generalization to any
nondecreasing activation, where the right side carries the factor
sum_j sigma'(<w_j, x>) in place of alpha * m.  Both verifiers use the
penalty grouping above; an alternative grouping (1 + 1/gamma)|<v*, x>|
seen in some write-ups differs on misclassified points with
|<v*, x>| < 1 and does *not* give a valid bound there (see
``verify_general_key_identity``).

Also here: the iteration/error bounds with the proofs' explicit
constants, the Markov link from surrogate risk to classification error,
and the randomized verification suites behind the ``verify`` CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import network as nw
from .distributions import AnalyticProfile, DistributionSpec, sample
from .rng import stream_rng


class TheoryError(ValueError):
    """Inputs outside the regime a bound is stated for."""


# ---------------------------------------------------------------------------
# comparator


def comparator_matrix(v_star: np.ndarray, outer_weights: np.ndarray) -> np.ndarray:
    """Rows sgn(a_j) * v_star / sqrt(m); unit Frobenius norm."""
    v = np.asarray(v_star, dtype=np.float64)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise TheoryError("v_star must be a unit vector")
    signs = np.sign(np.asarray(outer_weights, dtype=np.float64))
    if np.any(signs == 0.0):
        raise TheoryError("outer weights must be nonzero")
    m = signs.shape[0]
    return np.outer(signs, v) / math.sqrt(m)


@dataclass(frozen=True)
class Comparator:
    """Comparator matrix with its direction and diagnostic margin grid."""

    v_star: np.ndarray
    V: np.ndarray
    gamma_grid: tuple[float, ...] = (0.05, 0.1, 0.25, 0.5, 1.0)

    @staticmethod
    def for_params(v_star: np.ndarray, params: nw.NetworkParams,
                   gamma_grid=(0.05, 0.1, 0.25, 0.5, 1.0)) -> "Comparator":
        return Comparator(np.asarray(v_star, dtype=np.float64),
                          comparator_matrix(v_star, params.outer_weights),
                          tuple(float(g) for g in gamma_grid))


# ---------------------------------------------------------------------------
# per-sample penalty


def xi_hat(v_star: np.ndarray, x: np.ndarray, y: int, gamma: float) -> float:
    """Soft-margin-band / misclassification penalty at one sample.

    The band indicator uses the half-open interval [0, gamma), so
    y <v*, x> = 0 counts as band membership, not misclassification.
    """
    if gamma <= 0.0:
        raise TheoryError(f"gamma must be positive, got {gamma}")
    z = float(np.dot(v_star, x))
    yz = y * z
    if yz < 0.0:
        return 1.0 + abs(z) / gamma
    if yz < gamma:
        return 1.0
    return 0.0


# ---------------------------------------------------------------------------
# key-identity verifiers


def verify_key_identity(params: nw.NetworkParams, x: np.ndarray, y: int,
                        v_star: np.ndarray, gamma: float) -> float:
    """Slack LHS - RHS of the leaky-ReLU correlation bound; >= 0 up to rounding.

    Applies to the bias-free network with uniform outer magnitude.
    """
    if params.hidden_biases is not None:
        raise TheoryError("the correlation bound is stated for bias-free networks")
    if params.activation_kind != nw.LEAKY_RELU:
        raise TheoryError("use verify_general_key_identity for non-leaky activations")
    a = params.outer_magnitude
    V = comparator_matrix(v_star, params.outer_weights)
    lhs = nw.network_gradient_correlation(params, x, y, V)
    rhs = a * gamma * math.sqrt(params.m) * (params.leaky_slope - xi_hat(v_star, x, y, gamma))
    return lhs - rhs


def verify_general_key_identity(hidden_weights: np.ndarray, outer_magnitude: float,
                                sigma_prime: Callable[[np.ndarray], np.ndarray],
                                x: np.ndarray, y: int, v_star: np.ndarray,
                                gamma: float) -> float:
    """Slack of the nondecreasing-activation bound.

    RHS = a * gamma / sqrt(m) * [1 - xi(gamma)] * sum_j sigma'(<w_j, x>)
    with z = <v*, x>, i.e. the bracket loses 1 on the band and
    (gamma + |z|) / gamma on misclassified points.  Bounding the
    derivative sum by [alpha * m, m] recovers the leaky-ReLU statement.

    Note the misclassification term must group as (gamma + |z|) / gamma
    = 1 + |z| / gamma; the superficially similar (1 + 1/gamma) * |z|
    equals it only at |z| = 1 and overstates the bound below that, where
    the inequality then fails (e.g. yz = -1/2, gamma = 1/2, any W).
    """
    if gamma <= 0.0:
        raise TheoryError(f"gamma must be positive, got {gamma}")
    W = np.asarray(hidden_weights, dtype=np.float64)
    m = W.shape[0]
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v_star, dtype=np.float64)
    sprime = np.asarray(sigma_prime(W @ x), dtype=np.float64)
    if np.any(sprime < -1e-12):
        raise TheoryError("activation derivative must be nonnegative")
    z = float(np.dot(v, x))
    yz = y * z
    ssum = float(np.sum(sprime))
    lhs = outer_magnitude / math.sqrt(m) * ssum * yz
    bracket = 1.0
    if 0.0 <= yz < gamma:
        bracket -= 1.0
    if yz < 0.0:
        bracket -= 1.0 + abs(z) / gamma
    rhs = outer_magnitude * gamma / math.sqrt(m) * bracket * ssum
    return lhs - rhs


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class BoundReport:
    """Iteration and error bound with the proofs' explicit constants."""

    mode: str
    gamma: float
    xi_bound: float
    t_bound: int
    err_bound: float
    components: dict = field(default_factory=dict)
    noiseless: bool = False


def _phi_of(profile: AnalyticProfile, soft_margin, gamma: float) -> float:
    if soft_margin is not None:
        if callable(soft_margin):
            return float(soft_margin(gamma))
        grid = sorted(soft_margin)
        vals = [soft_margin[g] for g in grid]
        return float(np.interp(gamma, grid, vals))
    if profile.hard_margin is not None:
        return 0.0 if gamma <= profile.hard_margin else math.nan
    if profile.anticoncentration is not None:
        return 2.0 * profile.anticoncentration * gamma
    raise TheoryError("no soft-margin information available")


def theorem_bound(profile: AnalyticProfile, alpha: float, loss: nw.LossSpec,
                  eta: float, g0: float, gamma: float | None = None,
                  soft_margin=None) -> BoundReport:
    """Explicit-constant iteration count and generalization bound.

    With no ``gamma`` and no empirical ``soft_margin``: hard-margin
    profiles use gamma = gamma0 and the margin-corollary closed form;
    anti-concentration profiles use gamma = sqrt(opt) and that
    corollary's closed form.  Supplying ``soft_margin`` (a callable or a
    gamma -> frequency map) switches to the generic bound, minimized by
    golden-section search over (0, 1] unless ``gamma`` pins it.

    The iteration count carries the proof's explicit constant 4:
    T = 4 / (eta * alpha^2 * gamma^2 * xi^2) * max(g0, 1), where xi is
    the analytic upper bound on the expected per-sample penalty.
    """
    opt = profile.opt_lin
    ndl0 = loss.surrogate_at_zero
    pref = 2.0 / ndl0 / alpha
    cm = profile.subexp_norm
    if opt <= 0.0:
        # Noiseless regime: the log(1/opt) refinement is undefined; only
        # the soft-margin term survives.  Flagged rather than clamped.
        g = gamma if gamma is not None else (profile.hard_margin or 1.0)
        phi = _phi_of(profile, soft_margin, g)
        xi = phi
        t = 1 if xi <= 0.0 else math.ceil(4.0 / (eta * alpha**2 * g**2 * xi**2) * max(g0, 1.0))
        return BoundReport("noiseless", g, xi, t, pref * phi,
                           {"phi_term": phi, "opt_term": 0.0, "log_term": 0.0},
                           noiseless=True)
    if not opt < 0.5:
        raise TheoryError(f"opt_lin must lie in (0, 1/2), got {opt}")
    if cm is None:
        raise TheoryError("profile needs subexp_norm (estimate it first)")

    def generic_err(g: float) -> float:
        phi = _phi_of(profile, soft_margin, g)
        return pref * (phi + (1.0 + cm / g) * opt + (cm / g) * opt * math.log(1.0 / opt))

    if gamma is None and soft_margin is None and profile.hard_margin is not None:
        mode, g = "hard_margin", profile.hard_margin
        cog = cm / g
        err = pref * (1.0 + cog + cog * math.log(1.0 / opt)) * opt
    elif gamma is None and soft_margin is None and profile.anticoncentration is not None:
        mode, g = "anti_concentration", math.sqrt(opt)
        u = profile.anticoncentration
        err = pref * (2.0 * u * g + 3.0 * (cm / g) * opt * math.log(1.0 / opt))
    elif gamma is not None:
        mode, g = "generic", float(gamma)
        err = generic_err(g)
    else:
        mode = "generic"
        g = _golden_section(generic_err, 1e-4, 1.0)
        err = generic_err(g)

    phi = _phi_of(profile, soft_margin, g)
    opt_term = (1.0 + cm / g) * opt
    log_term = (cm / g) * opt * math.log(1.0 / opt)
    xi = phi + opt_term + log_term
    t = math.ceil(4.0 / (eta * alpha**2 * g**2 * xi**2) * max(g0, 1.0))
    return BoundReport(mode, g, xi, t, err,
                       {"phi_term": phi, "opt_term": opt_term, "log_term": log_term})


def _golden_section(f, lo: float, hi: float, iters: int = 200) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def markov_error_bound(surrogate_risk: float, loss: nw.LossSpec) -> float:
    """Classification-error bound risk / (-loss'(0)); 2 * risk for cross-entropy."""
    if surrogate_risk < 0.0:
        raise TheoryError("surrogate risk must be nonnegative")
    return surrogate_risk / loss.surrogate_at_zero


# ---------------------------------------------------------------------------
# penalty estimation


@dataclass(frozen=True)
class XiEstimate:
    mean: float
    std_error: float
    n: int
    analytic_bound: float | None = None


def xi_values(v_star: np.ndarray, X: np.ndarray, y: np.ndarray,
              gamma: float) -> np.ndarray:
    """Vectorized penalty over a sample set."""
    if gamma <= 0.0:
        raise TheoryError(f"gamma must be positive, got {gamma}")
    z = np.asarray(X, dtype=np.float64) @ np.asarray(v_star, dtype=np.float64)
    yz = y * z
    out = np.zeros(len(z))
    out[(yz >= 0) & (yz < gamma)] = 1.0
    neg = yz < 0
    out[neg] = 1.0 + np.abs(z[neg]) / gamma
    return out


def xi_estimate(v_star: np.ndarray, gamma: float, *,
                samples: tuple[np.ndarray, np.ndarray] | None = None,
                spec: DistributionSpec | None = None, n: int = 100_000,
                seed: int = 0, profile: AnalyticProfile | None = None,
                phi: float | None = None) -> XiEstimate:
    """Monte-Carlo mean of the penalty with a normal-approximation CI.

    The analytic companion bound phi(gamma) + (1 + 1/gamma) * opt is
    attached when a profile (and phi value) is available.
    """
    if samples is None:
        if spec is None:
            raise TheoryError("need either samples or a spec to draw from")
        samples = sample(spec, stream_rng(seed, 0), n)
    X, y = samples
    if len(y) < 10_000:
        raise TheoryError("need at least 1e4 samples")
    vals = xi_values(v_star, X, y, gamma)
    bound = None
    if profile is not None and phi is not None:
        bound = phi + (1.0 + 1.0 / gamma) * profile.opt_lin
    return XiEstimate(float(np.mean(vals)),
                      float(np.std(vals, ddof=1) / math.sqrt(len(vals))),
                      len(vals), bound)


# ---------------------------------------------------------------------------
# randomized suites


@dataclass(frozen=True)
class SuiteReport:
    name: str
    n_tuples: int
    seed: int
    min_slack: float
    worst: dict
    passed: bool
    tolerance: float = -1e-9

    def to_dict(self) -> dict:
        return {"name": self.name, "n_tuples": self.n_tuples, "seed": self.seed,
                "min_slack": self.min_slack, "worst": self.worst,
                "passed": self.passed, "tolerance": self.tolerance}


def _random_unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def _random_tuple(rng):
    m = int(rng.integers(1, 9))
    d = int(rng.integers(1, 7))
    scale = math.exp(rng.normal(0.0, 1.0))
    W = rng.normal(0.0, scale, size=(m, d))
    x = rng.normal(0.0, math.exp(rng.normal(0.0, 0.7)), size=d)
    y = 1 if rng.random() < 0.5 else -1
    gamma = float(rng.uniform(0.01, 0.999))
    v_star = _random_unit(rng, d)
    a = math.exp(rng.normal(0.0, 0.5)) / math.sqrt(m)
    alpha = float(rng.uniform(0.01, 1.0))
    return m, d, W, x, y, gamma, v_star, a, alpha


def run_key_identity_suite(n_tuples: int, seed: int,
                           tolerance: float = -1e-9) -> SuiteReport:
    """Leaky-ReLU correlation bound on random (W, x, y, gamma, v*) tuples."""
    rng = stream_rng(seed, 0)
    min_slack, worst = math.inf, {}
    for i in range(n_tuples):
        m, d, W, x, y, gamma, v_star, a, alpha = _random_tuple(rng)
        params = nw.NetworkParams(W, nw.balanced_outer_weights(m, a),
                                  leaky_slope=alpha)
        slack = verify_key_identity(params, x, y, v_star, gamma)
        if slack < min_slack:
            min_slack, worst = slack, {"tuple_index": i, "m": m, "d": d,
                                       "gamma": gamma, "alpha": alpha}
    return SuiteReport("lemma_key_identity", n_tuples, seed, min_slack, worst,
                       min_slack >= tolerance, tolerance)


_SIGMA_PRIMES = {
    "leaky_relu": lambda alpha: (lambda z: np.where(np.asarray(z) >= 0, 1.0, alpha)),
    "relu": lambda alpha: (lambda z: np.where(np.asarray(z) >= 0, 1.0, 0.0)),
    "tanh": lambda alpha: (lambda z: 1.0 - np.tanh(z) ** 2),
}


def run_general_identity_suite(activation: str, n_tuples: int, seed: int,
                               tolerance: float = -1e-9) -> SuiteReport:
    """General nondecreasing-activation bound on random tuples."""
    if activation not in _SIGMA_PRIMES:
        raise TheoryError(f"unknown activation {activation!r}")
    rng = stream_rng(seed, 1)
    min_slack, worst = math.inf, {}
    for i in range(n_tuples):
        m, d, W, x, y, gamma, v_star, a, alpha = _random_tuple(rng)
        sp = _SIGMA_PRIMES[activation](alpha)
        slack = verify_general_key_identity(W, a, sp, x, y, v_star, gamma)
        if slack < min_slack:
            min_slack, worst = slack, {"tuple_index": i, "m": m, "d": d,
                                       "gamma": gamma, "alpha": alpha}
    return SuiteReport(f"lemma_general_identity_{activation}", n_tuples, seed,
                       min_slack, worst, min_slack >= tolerance, tolerance)


def run_implication_suite(n_tuples: int, seed: int,
                          tolerance: float = -1e-9) -> SuiteReport:
    """Check that the general bound implies the specialized one.

    For leaky ReLU the derivative sum lies in [alpha * m, m]; the
    general RHS evaluated at the envelope end matching the bracket sign
    must dominate the specialized RHS a * gamma * sqrt(m) * (alpha - xi)
    on every tuple.
    """
    rng = stream_rng(seed, 2)
    min_slack, worst = math.inf, {}
    for i in range(n_tuples):
        m, d, W, x, y, gamma, v_star, a, alpha = _random_tuple(rng)
        z = float(np.dot(v_star, x))
        bracket = 1.0 - xi_hat(v_star, x, y, gamma)
        envelope = a * gamma / math.sqrt(m) * bracket * (alpha * m if bracket >= 0 else m)
        rhs_specialized = a * gamma * math.sqrt(m) * (alpha - xi_hat(v_star, x, y, gamma))
        slack = envelope - rhs_specialized
        if slack < min_slack:
            min_slack, worst = slack, {"tuple_index": i, "gamma": gamma,
                                       "alpha": alpha, "z": z}
    return SuiteReport("lemma_implication", n_tuples, seed, min_slack, worst,
                       min_slack >= tolerance, tolerance)


def _random_check_config(rng):
    depth = int(rng.choice([1, 1, 1, 3]))
    m = int(rng.integers(2, 7)) if depth == 1 else int(rng.integers(2, 5))
    d = int(rng.integers(1, 5))
    params = nw.init_params(
        m, d, rng,
        leaky_slope=float(rng.uniform(0.05, 1.0)),
        activation_kind=str(rng.choice([nw.LEAKY_RELU, nw.TANH])),
        init_variance=float(rng.uniform(0.2, 2.0)),
        use_biases=bool(rng.random() < 0.5),
        outer_trainable=bool(rng.random() < 0.5),
        depth=depth,
        shuffle_outer_signs=True,
    )
    return params


def gradient_check_suite(n_configs: int, seed: int, *, step: float = 1e-6,
                         tolerance: float = 1e-5,
                         kink_margin: float = 1e-4) -> SuiteReport:
    """Analytic gradients vs central finite differences.

    Inputs are redrawn until every pre-activation clears the kink by
    ``kink_margin``.  The reported slack is tolerance minus the max
    relative error max_err / max(1, |grad|_inf).
    """
    rng = stream_rng(seed, 3)
    loss = nw.LossSpec()
    max_rel, worst = 0.0, {}
    for i in range(n_configs):
        params = _random_check_config(rng)
        for _ in range(100):
            x = rng.normal(0.0, 1.5, size=params.d)
            zs, _ = nw._hidden_states(params, x[None, :])
            if params.activation_kind != nw.LEAKY_RELU or all(
                    np.min(np.abs(z)) > kink_margin for z in zs):
                break
        y = 1 if rng.random() < 0.5 else -1
        rel = _max_fd_error(params, x, y, loss, step)
        if rel > max_rel:
            max_rel, worst = rel, {"config_index": i, "m": params.m, "d": params.d,
                                   "activation": params.activation_kind}
    return SuiteReport("gradient_check", n_configs, seed, tolerance - max_rel,
                       worst, max_rel <= tolerance, 0.0)


def _max_fd_error(params, x, y, loss, h):
    grads = nw.loss_gradient(params, x, y, loss)

    def f_of(p):
        return float(loss.loss(y * nw.forward(p, x)))

    errs = []

    def check(arr, analytic, rebuild):
        fd = np.zeros_like(arr, dtype=np.float64)
        flat = arr.ravel()
        for k in range(flat.size):
            bumped = flat.copy()
            bumped[k] = flat[k] + h
            hi = f_of(rebuild(bumped.reshape(arr.shape)))
            bumped[k] = flat[k] - h
            lo = f_of(rebuild(bumped.reshape(arr.shape)))
            fd.ravel()[k] = (hi - lo) / (2.0 * h)
        scale = max(1.0, float(np.max(np.abs(analytic))), float(np.max(np.abs(fd))))
        errs.append(float(np.max(np.abs(fd - analytic))) / scale)

    check(params.hidden_weights, grads.hidden,
          lambda w: nw.with_updates(params, hidden_weights=w))
    if grads.biases is not None:
        check(params.hidden_biases, grads.biases,
              lambda b: nw.with_updates(params, hidden_biases=b))
    if grads.outer is not None:
        check(params.outer_weights, grads.outer,
              lambda a: nw.with_updates(params, outer_weights=a))
    if grads.deep is not None:
        for l in range(len(grads.deep)):
            def rebuild(Ml, _l=l):
                mats = list(params.depth_extension)
                mats[_l] = Ml
                return nw.with_updates(params, depth_extension=tuple(mats))
            check(params.depth_extension[l], grads.deep[l], rebuild)
    return max(errs)
