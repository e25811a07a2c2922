"""Comparator, penalty, inequality verifiers, and explicit bounds."""

import math

import numpy as np
import pytest

import halfspace_sgd.network as nw
import halfspace_sgd.theory as th
from halfspace_sgd.distributions import (ABSOLUTE_BOUNDARY, DistributionSpec,
                                         analytic_profile)
from halfspace_sgd.rng import stream_rng


def test_comparator_structure():
    outer = np.array([0.5, -0.5, 0.5])
    v = np.array([0.6, 0.8])
    V = th.comparator_matrix(v, outer)
    s = math.sqrt(3.0)
    assert np.allclose(V, np.array([v, -v, v]) / s)
    assert np.linalg.norm(V) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(th.TheoryError):
        th.comparator_matrix(2.0 * v, outer)
    with pytest.raises(th.TheoryError):
        th.comparator_matrix(v, np.array([0.5, 0.0]))


def test_xi_hat_cases():
    v = np.array([1.0, 0.0])
    # Confident correct side: no penalty.
    assert th.xi_hat(v, np.array([2.0, 5.0]), 1, 0.5) == 0.0
    # Inside the band: unit penalty.
    assert th.xi_hat(v, np.array([0.3, 0.0]), 1, 0.5) == 1.0
    # Misclassified at z = -0.3, gamma = 0.5: 1 + 0.3 / 0.5 = 1.6.
    assert th.xi_hat(v, np.array([-0.3, 0.0]), 1, 0.5) == pytest.approx(1.6)
    # Boundary convention: y z = 0 counts as band, not misclassification.
    assert th.xi_hat(v, np.array([0.0, 3.0]), -1, 0.5) == 1.0
    # Exactly at the band edge: outside.
    assert th.xi_hat(v, np.array([0.5, 0.0]), 1, 0.5) == 0.0
    with pytest.raises(th.TheoryError):
        th.xi_hat(v, np.zeros(2), 1, 0.0)


def test_xi_values_vectorized_matches_scalar():
    rng = stream_rng(3, 0)
    X = rng.normal(size=(200, 3))
    y = np.where(rng.random(200) < 0.5, 1, -1)
    v = np.array([1.0, 0.0, 0.0])
    vals = th.xi_values(v, X, y, 0.3)
    for i in range(200):
        assert vals[i] == pytest.approx(th.xi_hat(v, X[i], int(y[i]), 0.3))


def test_key_identity_linear_network_exact_slack():
    # A single positive unit active at x: LHS = a * sqrt(m) * yz and, for a
    # confident point (xi = 0), RHS = a * gamma * sqrt(m) * alpha, so the
    # slack is exactly yz - gamma * alpha here (a = m = 1).
    W = np.array([[3.0, 0.0]])
    params = nw.NetworkParams(W, np.array([1.0]), leaky_slope=0.5)
    v = np.array([1.0, 0.0])
    x = np.array([2.0, 1.0])
    slack = th.verify_key_identity(params, x, 1, v, 0.25)
    assert slack == pytest.approx(2.0 - 0.25 * 0.5, rel=1e-14)


def test_key_identity_requires_supported_model():
    params = nw.NetworkParams(np.zeros((2, 2)), np.array([1.0, -1.0]),
                              hidden_biases=np.zeros(2))
    with pytest.raises(th.TheoryError):
        th.verify_key_identity(params, np.zeros(2), 1, np.array([1.0, 0.0]), 0.5)
    params = nw.NetworkParams(np.zeros((2, 2)), np.array([1.0, -1.0]),
                              activation_kind=nw.TANH)
    with pytest.raises(th.TheoryError):
        th.verify_key_identity(params, np.zeros(2), 1, np.array([1.0, 0.0]), 0.5)


def test_general_identity_is_tight_on_misclassified_points():
    # For yz < 0 the corrected grouping makes the bound an identity.
    W = np.array([[1.0, 1.0], [2.0, -1.0]])
    v = np.array([1.0, 0.0])
    x = np.array([-0.4, 0.2])
    sp = lambda z: np.where(np.asarray(z) >= 0, 1.0, 0.3)
    slack = th.verify_general_key_identity(W, 0.7, sp, x, 1, v, 0.5)
    assert slack == pytest.approx(0.0, abs=1e-15)


def test_general_identity_rejects_negative_derivative():
    with pytest.raises(th.TheoryError):
        th.verify_general_key_identity(np.ones((1, 2)), 1.0,
                                       lambda z: -np.ones_like(np.asarray(z)),
                                       np.ones(2), 1, np.array([1.0, 0.0]), 0.5)


def test_randomized_suites_pass():
    for rep in (th.run_key_identity_suite(3000, 17),
                th.run_general_identity_suite("leaky_relu", 3000, 17),
                th.run_general_identity_suite("relu", 3000, 17),
                th.run_general_identity_suite("tanh", 3000, 17),
                th.run_implication_suite(3000, 17)):
        assert rep.passed, rep.to_dict()
        assert rep.min_slack >= -1e-9


def test_gradient_check_suite_passes():
    rep = th.gradient_check_suite(60, 21)
    assert rep.passed, rep.to_dict()


def test_theorem_bound_hard_margin_closed_form():
    prof_base = analytic_profile(
        DistributionSpec("two_gaussian_adversarial", gamma0=0.5, b=2.04,
                         rcn_rate=0.1))
    # Attach an empirical sub-exponential parameter.
    import dataclasses
    prof = dataclasses.replace(prof_base, subexp_norm=1.3)
    loss = nw.LossSpec()
    alpha = 0.1
    rep = th.theorem_bound(prof, alpha, loss, eta=0.01, g0=1.0)
    assert rep.mode == "hard_margin" and rep.gamma == 0.5
    opt = prof.opt_lin
    cog = 1.3 / 0.5
    expected = (2.0 / 0.5 / alpha) * (1.0 + cog + cog * math.log(1.0 / opt)) * opt
    assert rep.err_bound == expected  # same float expression, exact match
    # phi vanishes below the hard margin, so xi has no margin term.
    assert rep.components["phi_term"] == 0.0
    assert rep.t_bound == math.ceil(4.0 / (0.01 * alpha**2 * 0.5**2 * rep.xi_bound**2))


def test_theorem_bound_anticoncentration_closed_form():
    prof = analytic_profile(DistributionSpec(ABSOLUTE_BOUNDARY, b=1.0))
    loss = nw.LossSpec()
    alpha = 0.1
    rep = th.theorem_bound(prof, alpha, loss, eta=0.01, g0=1.0)
    assert rep.mode == "anti_concentration"
    opt = prof.opt_lin
    g = math.sqrt(opt)
    assert rep.gamma == g
    cm = prof.subexp_norm
    expected = (2.0 / 0.5 / alpha) * (2.0 * 1.0 * g
                                      + 3.0 * (cm / g) * opt * math.log(1.0 / opt))
    assert rep.err_bound == expected


def test_theorem_bound_generic_and_monotonicity():
    prof = analytic_profile(DistributionSpec(ABSOLUTE_BOUNDARY, b=1.0))
    loss = nw.LossSpec()
    margin = lambda g: 2.0 * g  # the anti-concentration envelope
    fixed = th.theorem_bound(prof, 0.1, loss, eta=0.01, g0=1.0, gamma=0.3,
                             soft_margin=margin)
    assert fixed.mode == "generic"
    searched = th.theorem_bound(prof, 0.1, loss, eta=0.01, g0=1.0,
                                soft_margin=margin)
    # The searched gamma can only improve on any fixed choice.
    assert searched.err_bound <= fixed.err_bound + 1e-12
    # Larger alpha gives a strictly smaller bound; smaller opt likewise.
    small_alpha = th.theorem_bound(prof, 0.05, loss, eta=0.01, g0=1.0, gamma=0.3,
                                   soft_margin=margin)
    assert fixed.err_bound < small_alpha.err_bound
    prof_easier = analytic_profile(DistributionSpec(ABSOLUTE_BOUNDARY, b=0.3))
    easier = th.theorem_bound(prof_easier, 0.1, loss, eta=0.01, g0=1.0)
    harder = th.theorem_bound(prof, 0.1, loss, eta=0.01, g0=1.0)
    assert easier.err_bound < harder.err_bound


def test_theorem_bound_noiseless():
    prof = th.AnalyticProfile(opt_lin=0.0, bayes_risk=0.0,
                              v_star=np.array([1.0, 0.0]), hard_margin=0.4)
    rep = th.theorem_bound(prof, 0.1, nw.LossSpec(), eta=0.01, g0=1.0)
    assert rep.noiseless and rep.err_bound == 0.0


def test_theorem_bound_rejects_missing_subexp():
    prof = analytic_profile(
        DistributionSpec("two_gaussian_adversarial", gamma0=0.5, b=2.04,
                         rcn_rate=0.1))
    with pytest.raises(th.TheoryError):
        th.theorem_bound(prof, 0.1, nw.LossSpec(), eta=0.01, g0=1.0)


def test_markov_bound():
    loss = nw.LossSpec()
    assert th.markov_error_bound(0.12, loss) == pytest.approx(0.24)
    assert th.markov_error_bound(0.0, loss) == 0.0
    with pytest.raises(th.TheoryError):
        th.markov_error_bound(-0.1, loss)


def test_markov_bound_dominates_empirical_error():
    # On any sample set, error <= surrogate risk / (-loss'(0)) pointwise.
    rng = stream_rng(31, 0)
    loss = nw.LossSpec()
    from halfspace_sgd.trainer import classification_error, surrogate_risk
    p = nw.init_params(20, 3, rng)
    X = rng.normal(size=(5000, 3))
    y = np.where(rng.random(5000) < 0.5, 1, -1)
    err = classification_error(p, X, y)
    bound = th.markov_error_bound(surrogate_risk(p, X, y, loss), loss)
    assert err <= bound + 1e-12


def test_xi_estimate():
    spec = DistributionSpec(ABSOLUTE_BOUNDARY, b=1.0)
    prof = analytic_profile(spec)
    gamma = 0.4
    est = th.xi_estimate(prof.v_star, gamma, spec=spec, n=100_000, seed=5,
                         profile=prof, phi=2.0 * gamma)
    assert est.n == 100_000 and est.std_error < 0.02
    # The analytic companion phi + (1 + 1/gamma) * opt upper-bounds the mean.
    assert est.mean <= est.analytic_bound + 3.0 * est.std_error
