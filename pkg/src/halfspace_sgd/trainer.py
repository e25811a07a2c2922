"""Online and multi-pass SGD with validation-based iterate selection.

The trainer consumes one fresh sample per step (online mode) or cycles
over a fixed sample set with per-epoch shuffling (minibatch mode),
evaluates validation classification error on a fixed cadence, and
returns the snapshot with the smallest validation error, scored on an
independent test set.

For the bias-free, fixed-outer-layer leaky-ReLU configuration trained
online, the trainer also verifies the per-step inequalities from the
convergence analysis on every step:

* correlation growth:  H_{t+1} - H_t >= eta * a * gamma * sqrt(m)
  * (alpha * E_t - xi_t(gamma)) for each diagnostic gamma,
* norm growth:  G_{t+1}^2 <= G_t^2 + 2 * eta + eta^2 * m * a^2 * |x_t|^2,
* Cauchy-Schwarz:  |H_t| <= G_t,

where H_t = <W_t, V>, G_t = |W_t|_F, and E_t is the surrogate loss at
the consumed sample.  Minimum slacks are recorded in the trace.
"""

from __future__ import annotations

import io
import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import network as nw
from .distributions import DistributionSpec, analytic_profile, sample
from .rng import (STREAM_INIT, STREAM_SHUFFLE, STREAM_TEST, STREAM_TRAIN,
                  STREAM_VALIDATION, stream_rng)
from .theory import comparator_matrix

_SAMPLE_CHUNK = 1024


class TrainingDivergedError(RuntimeError):
    """Non-finite gradient or weights encountered; carries a snapshot."""

    def __init__(self, message: str, step: int, params: nw.NetworkParams):
        super().__init__(f"{message} at step {step}")
        self.step = step
        self.params = params


class ConfigurationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class BatchMode:
    kind: str = "online"
    size: int = 32
    epochs: int = 100

    def __post_init__(self):
        if self.kind not in ("online", "minibatch"):
            raise ConfigurationError(f"unknown batch mode {self.kind!r}")
        if self.kind == "minibatch" and (self.size < 1 or self.epochs < 1):
            raise ConfigurationError("minibatch size and epochs must be >= 1")


@dataclass(frozen=True)
class NetworkConfig:
    m: int = 200
    d: int = 2
    leaky_slope: float = 0.1
    activation: str = nw.LEAKY_RELU
    outer_magnitude: float | None = None
    outer_trainable: bool = False
    use_biases: bool = False
    depth: int = 1
    shuffle_outer_signs: bool = False

    def __post_init__(self):
        if self.m < 1 or self.d < 1 or self.depth < 1:
            raise ConfigurationError("m, d, and depth must be positive")


@dataclass(frozen=True)
class TrainConfig:
    step_size: float = 0.01
    iterations: int = 20_000
    batch: BatchMode = BatchMode()
    validation_size: int = 10_000
    validation_cadence: int = 100
    test_size: int = 20_000
    loss: nw.LossSpec = field(default_factory=nw.LossSpec)
    init_variance: float | None = None
    seed: int = 0
    diag_gamma_grid: tuple[float, ...] = ()
    enforce_step_size_bound: bool = False

    def __post_init__(self):
        if self.step_size <= 0.0:
            raise ConfigurationError("step_size must be positive")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.validation_cadence < 1 or self.validation_size < 1 or self.test_size < 1:
            raise ConfigurationError("validation/test settings must be positive")


# ---------------------------------------------------------------------------
# results


@dataclass
class TheoryTrace:
    """Per-cadence record of the tracked theory quantities.

    ``lemma42_min_slack`` and ``lemma43_min_slack`` hold the minimum
    per-step slack observed since the previous record; ``xi`` and
    ``lemma41_slack`` refer to the sample consumed at the recorded step.
    """

    gamma_grid: tuple[float, ...]
    t: np.ndarray
    h: np.ndarray
    g: np.ndarray
    surrogate_window_mean: np.ndarray
    xi: np.ndarray
    lemma41_slack: np.ndarray
    lemma42_min_slack: np.ndarray
    lemma43_min_slack: np.ndarray
    min_lemma41_slack: float
    min_lemma42_slack: float
    min_lemma43_slack: float
    min_cauchy_schwarz_slack: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        gcols = [f"xi_gamma_{g}" for g in self.gamma_grid]
        scols = [f"lemma42_min_slack_gamma_{g}" for g in self.gamma_grid]
        writer.writerow(["t", "H", "G", "surrogate_window_mean", *gcols,
                         "lemma41_slack", *scols, "lemma43_min_slack"])
        for i in range(len(self.t)):
            writer.writerow([int(self.t[i]), repr(float(self.h[i])),
                             repr(float(self.g[i])),
                             repr(float(self.surrogate_window_mean[i])),
                             *[repr(float(v)) for v in self.xi[i]],
                             repr(float(self.lemma41_slack[i])),
                             *[repr(float(v)) for v in self.lemma42_min_slack[i]],
                             repr(float(self.lemma43_min_slack[i]))])
        return buf.getvalue()


def empty_trace() -> TheoryTrace:
    z = np.zeros(0)
    return TheoryTrace((), z, z, z, z, z.reshape(0, 0), z, z.reshape(0, 0), z,
                       math.inf, math.inf, math.inf, math.inf)


@dataclass
class ExperimentResult:
    best_iterate: int
    test_error: float
    surrogate_risk: float
    validation_error: float
    opt_lin: float
    bayes_risk: float
    seed: int
    wall_time: float
    config: dict
    validation_iterations: np.ndarray
    validation_errors: np.ndarray
    params: nw.NetworkParams

    def to_dict(self) -> dict:
        """Deterministic summary; timing lives under the 'timing' key."""
        return {
            "best_iterate": int(self.best_iterate),
            "test_error": float(self.test_error),
            "test_accuracy": 1.0 - float(self.test_error),
            "surrogate_risk": float(self.surrogate_risk),
            "validation_error": float(self.validation_error),
            "opt_lin": float(self.opt_lin),
            "bayes_risk": float(self.bayes_risk),
            "seed": int(self.seed),
            "config": self.config,
            "timing": {"wall_time_seconds": float(self.wall_time)},
        }


def select_best_iterate(validation_errors) -> int:
    """Index of the minimum; ties break toward the earliest iterate."""
    errors = np.asarray(validation_errors, dtype=np.float64)
    if errors.size == 0:
        raise ConfigurationError("empty validation curve")
    return int(np.argmin(errors))


# ---------------------------------------------------------------------------
# steps


def classification_error(params: nw.NetworkParams, X: np.ndarray,
                         y: np.ndarray) -> float:
    """Fraction with y * f(x) <= 0; a zero output never matches a label."""
    return float(np.mean(y * nw.forward_batch(params, X) <= 0.0))


def surrogate_risk(params: nw.NetworkParams, X: np.ndarray, y: np.ndarray,
                   loss: nw.LossSpec) -> float:
    return float(np.mean(loss.surrogate(y * nw.forward_batch(params, X))))


def _apply_gradients(params: nw.NetworkParams, grads: nw.Gradients,
                     eta: float, step: int) -> nw.NetworkParams:
    if not grads.is_finite():
        raise TrainingDivergedError("non-finite gradient", step, params)
    with np.errstate(over="ignore"):
        updates = {"hidden_weights": params.hidden_weights - eta * grads.hidden}
        if grads.biases is not None:
            updates["hidden_biases"] = params.hidden_biases - eta * grads.biases
        if grads.outer is not None:
            updates["outer_weights"] = params.outer_weights - eta * grads.outer
        if grads.deep is not None:
            updates["depth_extension"] = tuple(
                M - eta * g for M, g in zip(params.depth_extension, grads.deep))
    try:
        return replace(params, **updates)
    except nw.InvalidParamsError:
        raise TrainingDivergedError("non-finite weights after update", step, params)


def sgd_step(params: nw.NetworkParams, x: np.ndarray, y: int, eta: float,
             loss: nw.LossSpec, step: int = 0) -> nw.NetworkParams:
    """One gradient step on all trainable blocks at one sample."""
    return _apply_gradients(params, nw.loss_gradient(params, x, y, loss), eta, step)


def _minibatch_gradients(params, X, y, loss) -> nw.Gradients:
    n = len(y)
    acc = None
    for i in range(n):
        g = nw.loss_gradient(params, X[i], int(y[i]), loss)
        if acc is None:
            acc = g
        else:
            acc = nw.Gradients(
                hidden=acc.hidden + g.hidden,
                biases=None if g.biases is None else acc.biases + g.biases,
                outer=None if g.outer is None else acc.outer + g.outer,
                deep=None if g.deep is None else tuple(
                    a + b for a, b in zip(acc.deep, g.deep)),
            )
    inv = 1.0 / n
    return nw.Gradients(
        hidden=acc.hidden * inv,
        biases=None if acc.biases is None else acc.biases * inv,
        outer=None if acc.outer is None else acc.outer * inv,
        deep=None if acc.deep is None else tuple(g * inv for g in acc.deep),
    )


# ---------------------------------------------------------------------------
# training


class _OnlineSource:
    """Chunked fresh-sample stream; chunk size is fixed so the draw
    sequence depends only on the seed."""

    def __init__(self, spec, rng):
        self.spec = spec
        self.rng = rng
        self.X = None
        self.y = None
        self.pos = 0

    def next(self):
        if self.X is None or self.pos >= len(self.y):
            self.X, self.y = sample(self.spec, self.rng, _SAMPLE_CHUNK)
            self.pos = 0
        i = self.pos
        self.pos += 1
        return self.X[i], int(self.y[i])


class _TheoryTracker:
    def __init__(self, params, v_star, gamma_grid, eta, alpha, loss):
        self.V = comparator_matrix(v_star, params.outer_weights)
        self.v_star = np.asarray(v_star, dtype=np.float64)
        self.grid = np.asarray(gamma_grid, dtype=np.float64)
        self.eta = eta
        self.alpha = alpha
        self.loss = loss
        self.a = params.outer_magnitude
        self.sqrt_m = math.sqrt(params.m)
        self.min41 = math.inf
        self.min42 = np.full(len(self.grid), math.inf)
        self.min43 = math.inf
        self.min_cs = math.inf
        self.window42 = np.full(len(self.grid), math.inf)
        self.window43 = math.inf
        self.last_xi = np.zeros(len(self.grid))
        self.last41 = math.inf
        self.e_sum = 0.0
        self.e_count = 0

    def h_of(self, params):
        return float(np.sum(params.hidden_weights * self.V))

    def g_of(self, params):
        return float(np.linalg.norm(params.hidden_weights))

    def observe(self, params_before, params_after, x, y):
        h0, h1 = self.h_of(params_before), self.h_of(params_after)
        g0, g1 = self.g_of(params_before), self.g_of(params_after)
        e_hat = float(self.loss.surrogate(y * nw.forward(params_before, x)))
        self.e_sum += e_hat
        self.e_count += 1
        xi = _xi_per_gamma(self.v_star, x, y, self.grid)
        rhs42 = self.eta * self.a * self.grid * self.sqrt_m * (self.alpha * e_hat - xi)
        slack42 = (h1 - h0) - rhs42
        slack43 = (g0 * g0 + 2.0 * self.eta
                   + self.eta ** 2 * params_before.m * self.a ** 2
                   * float(np.dot(x, x))) - g1 * g1
        lhs = float(y * np.sum(
            nw._network_gradients(params_before, np.asarray(x, dtype=np.float64))[0] * self.V))
        rhs41 = self.a * self.grid * self.sqrt_m * (self.alpha - xi)
        slack41 = float(np.min(lhs - rhs41))
        cs = g1 - abs(h1)
        self.min41 = min(self.min41, slack41)
        self.min42 = np.minimum(self.min42, slack42)
        self.min43 = min(self.min43, slack43)
        self.min_cs = min(self.min_cs, cs)
        self.window42 = np.minimum(self.window42, slack42)
        self.window43 = min(self.window43, slack43)
        self.last_xi = xi
        self.last41 = slack41

    def record(self, t, params, rows):
        mean_e = self.e_sum / self.e_count if self.e_count else math.nan
        rows.append((t, self.h_of(params), self.g_of(params), mean_e,
                     self.last_xi.copy(), self.last41, self.window42.copy(),
                     self.window43))
        self.e_sum = 0.0
        self.e_count = 0
        self.window42 = np.full(len(self.grid), math.inf)
        self.window43 = math.inf


def _xi_per_gamma(v_star, x, y, grid):
    z = float(np.dot(v_star, x))
    yz = y * z
    out = np.zeros(len(grid))
    for i, g in enumerate(grid):
        if yz < 0.0:
            out[i] = 1.0 + abs(z) / g
        elif yz < g:
            out[i] = 1.0
    return out


def _theory_eligible(net_cfg: NetworkConfig, cfg: TrainConfig) -> bool:
    return (cfg.batch.kind == "online"
            and net_cfg.activation == nw.LEAKY_RELU
            and not net_cfg.use_biases
            and not net_cfg.outer_trainable
            and net_cfg.depth == 1
            and len(cfg.diag_gamma_grid) > 0)


def train(spec: DistributionSpec, net_cfg: NetworkConfig,
          cfg: TrainConfig) -> tuple[ExperimentResult, TheoryTrace]:
    """Run SGD and return the validation-selected snapshot plus trace."""
    t_start = time.perf_counter()
    init_rng = stream_rng(cfg.seed, STREAM_INIT)
    train_rng = stream_rng(cfg.seed, STREAM_TRAIN)
    val_rng = stream_rng(cfg.seed, STREAM_VALIDATION)
    test_rng = stream_rng(cfg.seed, STREAM_TEST)

    params = nw.init_params(
        net_cfg.m, net_cfg.d, init_rng,
        leaky_slope=net_cfg.leaky_slope, activation_kind=net_cfg.activation,
        init_variance=cfg.init_variance, outer_magnitude=net_cfg.outer_magnitude,
        use_biases=net_cfg.use_biases, outer_trainable=net_cfg.outer_trainable,
        depth=net_cfg.depth, shuffle_outer_signs=net_cfg.shuffle_outer_signs)

    X_val, y_val = sample(spec, val_rng, cfg.validation_size)
    if cfg.enforce_step_size_bound:
        bx2 = float(np.mean(np.sum(X_val ** 2, axis=1)))
        if cfg.step_size > 1.0 / bx2:
            raise ConfigurationError(
                f"step_size {cfg.step_size} exceeds 1/B_X^2 = {1.0 / bx2:.3g}")

    try:
        profile = analytic_profile(spec)
    except Exception:
        profile = None

    tracker = None
    rows: list = []
    if _theory_eligible(net_cfg, cfg) and profile is not None:
        tracker = _TheoryTracker(params, profile.v_star, cfg.diag_gamma_grid,
                                 cfg.step_size, net_cfg.leaky_slope, cfg.loss)

    val_ts, val_errs = [0], [classification_error(params, X_val, y_val)]
    best_err, best_t, best_params = val_errs[0], 0, params

    def validate(t, p):
        nonlocal best_err, best_t, best_params
        err = classification_error(p, X_val, y_val)
        val_ts.append(t)
        val_errs.append(err)
        if err < best_err:
            best_err, best_t, best_params = err, t, p

    step = 0
    if cfg.batch.kind == "online":
        source = _OnlineSource(spec, train_rng)
        for step in range(1, cfg.iterations + 1):
            x, y = source.next()
            before = params
            params = sgd_step(params, x, y, cfg.step_size, cfg.loss, step)
            if tracker is not None:
                tracker.observe(before, params, x, y)
            if step % cfg.validation_cadence == 0 or step == cfg.iterations:
                validate(step, params)
                if tracker is not None:
                    tracker.record(step, params, rows)
    else:
        X_train, y_train = sample(spec, train_rng, cfg.iterations)
        shuffle_rng = stream_rng(cfg.seed, STREAM_SHUFFLE)
        n = cfg.iterations
        for _ in range(cfg.batch.epochs):
            perm = shuffle_rng.permutation(n)
            for lo in range(0, n, cfg.batch.size):
                idx = perm[lo:lo + cfg.batch.size]
                grads = _minibatch_gradients(params, X_train[idx], y_train[idx],
                                             cfg.loss)
                params = _apply_gradients(params, grads, cfg.step_size, step)
                step += 1
                if step % cfg.validation_cadence == 0:
                    validate(step, params)
        if val_ts[-1] != step:
            validate(step, params)

    X_test, y_test = sample(spec, test_rng, cfg.test_size)
    test_err = classification_error(best_params, X_test, y_test)
    risk = surrogate_risk(best_params, X_test, y_test, cfg.loss)

    if tracker is not None and rows:
        grid = tuple(float(g) for g in cfg.diag_gamma_grid)
        trace = TheoryTrace(
            gamma_grid=grid,
            t=np.array([r[0] for r in rows]),
            h=np.array([r[1] for r in rows]),
            g=np.array([r[2] for r in rows]),
            surrogate_window_mean=np.array([r[3] for r in rows]),
            xi=np.array([r[4] for r in rows]),
            lemma41_slack=np.array([r[5] for r in rows]),
            lemma42_min_slack=np.array([r[6] for r in rows]),
            lemma43_min_slack=np.array([r[7] for r in rows]),
            min_lemma41_slack=tracker.min41,
            min_lemma42_slack=float(np.min(tracker.min42)),
            min_lemma43_slack=tracker.min43,
            min_cauchy_schwarz_slack=tracker.min_cs,
        )
    else:
        trace = empty_trace()

    result = ExperimentResult(
        best_iterate=best_t,
        test_error=test_err,
        surrogate_risk=risk,
        validation_error=best_err,
        opt_lin=profile.opt_lin if profile else math.nan,
        bayes_risk=profile.bayes_risk if profile else math.nan,
        seed=cfg.seed,
        wall_time=time.perf_counter() - t_start,
        config=_config_snapshot(spec, net_cfg, cfg),
        validation_iterations=np.array(val_ts),
        validation_errors=np.array(val_errs),
        params=best_params,
    )
    return result, trace


def _config_snapshot(spec, net_cfg, cfg) -> dict:
    try:
        dist = spec.to_config()
    except Exception:
        dist = {"kind": spec.kind}
    return {
        "distribution": dist,
        "network": {
            "m": net_cfg.m, "d": net_cfg.d, "leaky_slope": net_cfg.leaky_slope,
            "activation": net_cfg.activation,
            "outer_magnitude": net_cfg.outer_magnitude,
            "outer_trainable": net_cfg.outer_trainable,
            "use_biases": net_cfg.use_biases, "depth": net_cfg.depth,
            "shuffle_outer_signs": net_cfg.shuffle_outer_signs,
        },
        "train": {
            "step_size": cfg.step_size, "iterations": cfg.iterations,
            "batch": {"kind": cfg.batch.kind, "size": cfg.batch.size,
                      "epochs": cfg.batch.epochs},
            "validation_size": cfg.validation_size,
            "validation_cadence": cfg.validation_cadence,
            "test_size": cfg.test_size, "loss": cfg.loss.kind,
            "init_variance": cfg.init_variance, "seed": cfg.seed,
            "diag_gamma_grid": list(cfg.diag_gamma_grid),
        },
    }


def validation_curve_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "validation_error"])
    for t, e in zip(result.validation_iterations, result.validation_errors):
        writer.writerow([int(t), repr(float(e))])
    return buf.getvalue()
