"""SGD loop, iterate selection, determinism, and the theory trace."""

import math

import numpy as np
import pytest

import halfspace_sgd.network as nw
import halfspace_sgd.trainer as tr
from halfspace_sgd.distributions import (ABSOLUTE_BOUNDARY, TWO_GAUSSIAN,
                                         CUSTOM, DistributionSpec)
from halfspace_sgd.rng import stream_rng


def mixture_spec():
    return DistributionSpec(TWO_GAUSSIAN, gamma0=0.5, b=2.04, rcn_rate=0.1)


def small_cfgs(**train_overrides):
    net = tr.NetworkConfig(m=40, d=2)
    defaults = dict(iterations=500, validation_size=1000, test_size=2000,
                    validation_cadence=100, seed=0)
    defaults.update(train_overrides)
    return net, tr.TrainConfig(**defaults)


def test_select_best_iterate():
    assert tr.select_best_iterate([0.3, 0.1, 0.1, 0.2]) == 1  # earliest tie
    assert tr.select_best_iterate([0.5]) == 0
    with pytest.raises(tr.ConfigurationError):
        tr.select_best_iterate([])


def test_classification_error_zero_output_counts_as_error():
    p = nw.NetworkParams(np.zeros((2, 2)), np.array([0.5, -0.5]))
    X = np.ones((10, 2))
    y = np.ones(10, dtype=np.int64)
    assert tr.classification_error(p, X, y) == 1.0


def test_single_step_from_zero_weights():
    # From W = 0 every pre-activation sits at the kink where sigma' = 1,
    # f = 0, and -loss'(0) = 1/2, so one step gives
    # w_j <- eta * 0.5 * y * a_j * x exactly.
    m, eta = 6, 0.05
    p = nw.NetworkParams(np.zeros((m, 2)), nw.balanced_outer_weights(m, 0.25))
    x = np.array([1.5, -2.0])
    y = -1
    p1 = tr.sgd_step(p, x, y, eta, nw.LossSpec())
    expected = eta * 0.5 * y * np.outer(p.outer_weights, x)
    assert np.allclose(p1.hidden_weights, expected, atol=1e-16)
    # The comparator correlation after the step is
    # eta * 0.5 * y * a * sqrt(m) * <v*, x> for any unit v*.
    from halfspace_sgd.theory import comparator_matrix
    v = np.array([0.6, -0.8])
    V = comparator_matrix(v, p.outer_weights)
    h1 = float(np.sum(p1.hidden_weights * V))
    assert h1 == pytest.approx(eta * 0.5 * y * 0.25 * math.sqrt(m)
                               * float(v @ x), rel=1e-13)


def test_zero_step_size_rejected():
    with pytest.raises(tr.ConfigurationError):
        tr.TrainConfig(step_size=0.0)


def test_training_is_deterministic():
    net, cfg = small_cfgs(seed=9, diag_gamma_grid=(0.1, 0.5))
    r1, t1 = tr.train(mixture_spec(), net, cfg)
    r2, t2 = tr.train(mixture_spec(), net, cfg)
    assert r1.test_error == r2.test_error
    assert np.array_equal(r1.validation_errors, r2.validation_errors)
    assert np.array_equal(r1.params.hidden_weights, r2.params.hidden_weights)
    assert t1.to_csv() == t2.to_csv()
    r3, _ = tr.train(mixture_spec(), net, tr.TrainConfig(
        iterations=500, validation_size=1000, test_size=2000,
        validation_cadence=100, seed=10))
    assert not np.array_equal(r1.params.hidden_weights, r3.params.hidden_weights)


def test_noiseless_separable_run_learns():
    def halfspace(rng, n):
        X = rng.standard_normal((n, 2))
        keep = np.abs(X[:, 0]) > 0.2
        X = X[keep]
        while len(X) < n:
            more = rng.standard_normal((n, 2))
            X = np.concatenate([X, more[np.abs(more[:, 0]) > 0.2]])
        X = X[:n]
        return X, np.sign(X[:, 0]).astype(np.int64)

    spec = DistributionSpec(CUSTOM, sampler=halfspace)
    net, cfg = small_cfgs(iterations=3000, seed=2)
    result, _ = tr.train(spec, net, cfg)
    assert result.test_error <= 0.01
    assert math.isnan(result.opt_lin)  # no analytic profile for custom specs


def test_theory_trace_slacks_nonnegative():
    net, cfg = small_cfgs(iterations=800, seed=4,
                          diag_gamma_grid=(0.05, 0.25, 0.5))
    result, trace = tr.train(mixture_spec(), net, cfg)
    assert trace.gamma_grid == (0.05, 0.25, 0.5)
    assert trace.min_lemma41_slack >= -1e-9
    assert trace.min_lemma42_slack >= -1e-9
    assert trace.min_lemma43_slack >= -1e-9
    assert trace.min_cauchy_schwarz_slack >= -1e-9
    # Trace rows cover the validation cadence.
    assert trace.t[0] == cfg.validation_cadence and trace.t[-1] == cfg.iterations
    header = trace.to_csv().splitlines()[0]
    assert "lemma41_slack" in header and "xi_gamma_0.25" in header


def test_trace_disabled_for_unsupported_configs():
    spec = mixture_spec()
    net = tr.NetworkConfig(m=10, d=2, use_biases=True)
    cfg = tr.TrainConfig(iterations=200, validation_size=500, test_size=500,
                         diag_gamma_grid=(0.5,), seed=0)
    _, trace = tr.train(spec, net, cfg)
    assert len(trace.t) == 0 and math.isinf(trace.min_lemma41_slack)


def test_validation_selection_prefers_best_snapshot():
    net, cfg = small_cfgs(seed=1)
    result, _ = tr.train(mixture_spec(), net, cfg)
    errs = result.validation_errors
    assert result.validation_error == np.min(errs)
    idx = int(np.argmin(errs))
    assert result.best_iterate == int(result.validation_iterations[idx])


def test_minibatch_mode_runs_and_validates():
    spec = DistributionSpec(ABSOLUTE_BOUNDARY, b=1.0)
    net = tr.NetworkConfig(m=20, d=2)
    cfg = tr.TrainConfig(iterations=256, batch=tr.BatchMode("minibatch", 32, 50),
                         validation_size=500, test_size=1000,
                         validation_cadence=100, seed=3)
    result, trace = tr.train(spec, net, cfg)
    assert len(trace.t) == 0  # theory trace is online-only
    # 50 epochs of 256 samples at batch 32 = 400 optimizer steps.
    assert result.validation_iterations[-1] == 400
    assert result.test_error <= 0.35  # well below the 0.75 base rate


def test_step_size_bound_enforcement():
    net = tr.NetworkConfig(m=10, d=2)
    cfg = tr.TrainConfig(step_size=1.0, iterations=10, validation_size=500,
                         test_size=500, enforce_step_size_bound=True, seed=0)
    with pytest.raises(tr.ConfigurationError):
        tr.train(mixture_spec(), net, cfg)  # E|x|^2 ~ 10 for the mixture


def test_divergence_raises_with_snapshot():
    def exploding(rng, n):
        X = rng.standard_normal((n, 2)) * 1e160
        return X, np.ones(n, dtype=np.int64)

    spec = DistributionSpec(CUSTOM, sampler=exploding)
    net = tr.NetworkConfig(m=4, d=2)
    cfg = tr.TrainConfig(step_size=1e160, iterations=50, validation_size=10,
                         test_size=10, seed=0)
    with pytest.raises(tr.TrainingDivergedError) as exc_info:
        tr.train(spec, net, cfg)
    assert exc_info.value.step >= 1
    assert isinstance(exc_info.value.params, nw.NetworkParams)


def test_result_dict_layout():
    net, cfg = small_cfgs(seed=6)
    result, _ = tr.train(mixture_spec(), net, cfg)
    d = result.to_dict()
    assert d["test_accuracy"] == pytest.approx(1.0 - d["test_error"])
    assert set(d["config"]) == {"distribution", "network", "train"}
    assert "wall_time_seconds" in d["timing"]
    csv_text = tr.validation_curve_csv(result)
    assert csv_text.splitlines()[0] == "t,validation_error"
    assert len(csv_text.splitlines()) == len(result.validation_errors) + 1
