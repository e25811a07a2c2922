"""Distribution samplers and closed-form error rates."""

import math

import numpy as np
import pytest

import halfspace_sgd.distributions as ds
from halfspace_sgd.rng import stream_rng


def mixture_spec(gamma0=0.5, b=2.04, p=0.1):
    return ds.DistributionSpec(ds.TWO_GAUSSIAN, gamma0=gamma0, b=b, rcn_rate=p)


def test_opt_lin_frozen_value():
    # Frozen from a 40-digit evaluation of the two-sided-tail closed form.
    assert ds.opt_lin_two_gaussian(0.5, 2.04, 0.1) == pytest.approx(
        0.24717497476755555, rel=1e-14)
    assert ds.bayes_risk_two_gaussian(0.5, 2.04, 0.1) == pytest.approx(
        0.08364722502582716, rel=1e-14)


def test_reference_boundary_hits_quarter_noise():
    # The reference setting b = 2.04 sits at OPT ~= 0.25.
    assert ds.opt_lin_two_gaussian(0.5, 2.04, 0.1) == pytest.approx(0.25, abs=0.005)


def test_boundary_from_opt_frozen_value():
    assert ds.boundary_from_opt(0.5, 0.1, 0.25) == pytest.approx(
        2.0523261096283869, rel=1e-12)


def test_boundary_round_trip():
    for opt in np.linspace(0.11, 0.45, 20):
        b = ds.boundary_from_opt(0.5, 0.1, float(opt))
        assert ds.opt_lin_two_gaussian(0.5, b, 0.1) == pytest.approx(
            float(opt), abs=1e-10)


def test_boundary_limits():
    # b -> gamma0: no deterministic band, only the RCN floor remains.
    assert ds.opt_lin_two_gaussian(0.5, 0.5 + 1e-12, 0.1) == pytest.approx(0.1, abs=1e-9)
    # Requests below the RCN floor are infeasible.
    with pytest.raises(ds.DistributionError):
        ds.boundary_from_opt(0.5, 0.1, 0.09)
    with pytest.raises(ds.DistributionError):
        ds.opt_lin_two_gaussian(0.5, 0.4, 0.1)  # b <= gamma0


def test_opt_lin_monotone_in_b():
    vals = [ds.opt_lin_two_gaussian(0.5, b, 0.1) for b in np.linspace(0.6, 2.9, 30)]
    assert all(x < y for x, y in zip(vals, vals[1:]))


def test_opt_lin_absolute():
    assert ds.opt_lin_absolute(1.0) == 0.25  # arctan(1) = pi / 4 exactly
    assert ds.opt_lin_absolute(2.0) == pytest.approx(0.35241638234956673, rel=1e-14)
    for opt in np.linspace(0.05, 0.45, 20):
        assert ds.opt_lin_absolute(ds.absolute_boundary_from_opt(float(opt))) \
            == pytest.approx(float(opt), abs=1e-12)
    vals = [ds.opt_lin_absolute(b) for b in np.linspace(0.2, 5.0, 25)]
    assert all(x < y for x, y in zip(vals, vals[1:]))


def test_spec_validation():
    with pytest.raises(ds.DistributionError):
        ds.DistributionSpec(ds.TWO_GAUSSIAN, gamma0=0.5, b=0.4)
    with pytest.raises(ds.DistributionError):
        ds.DistributionSpec(ds.TWO_GAUSSIAN, gamma0=0.5, b=2.0, rcn_rate=0.5)
    with pytest.raises(ds.DistributionError):
        ds.DistributionSpec(ds.ABSOLUTE_BOUNDARY, b=-1.0)
    with pytest.raises(ds.DistributionError):
        ds.DistributionSpec(ds.ABSOLUTE_BOUNDARY, b=1.0, d=3)
    with pytest.raises(ds.DistributionError):
        ds.DistributionSpec("mystery")


def test_sampling_respects_truncation_and_labels():
    spec = mixture_spec()
    X, y = ds.sample(spec, stream_rng(7, 0), 50_000)
    assert X.shape == (50_000, 2) and set(np.unique(y)) == {-1, 1}
    assert np.min(np.abs(X[:, 0])) > spec.gamma0
    # On the deterministic band the label is always -sign(x1).
    band = np.abs(X[:, 0]) <= spec.b
    assert np.all(y[band] == -np.sign(X[band, 0]))
    # Outside the band, labels disagree with sign(x1) at about the RCN rate.
    out = ~band
    flip_rate = np.mean(y[out] != np.sign(X[out, 0]))
    assert flip_rate == pytest.approx(spec.rcn_rate, abs=0.01)
    # Both clusters are populated about equally.
    assert np.mean(X[:, 0] > 0) == pytest.approx(0.5, abs=0.02)


def test_sampling_matches_closed_form_error():
    spec = mixture_spec()
    X, y = ds.sample(spec, stream_rng(8, 0), 200_000)
    err = np.mean(y * X[:, 0] <= 0)
    assert err == pytest.approx(ds.opt_lin_two_gaussian(0.5, 2.04, 0.1), abs=0.004)
    bayes_err = np.mean(ds.bayes_predict(spec, X) != y)
    assert bayes_err == pytest.approx(ds.bayes_risk_two_gaussian(0.5, 2.04, 0.1),
                                      abs=0.003)


def test_absolute_sampling_matches_closed_form():
    spec = ds.DistributionSpec(ds.ABSOLUTE_BOUNDARY, b=1.0)
    X, y = ds.sample(spec, stream_rng(9, 0), 200_000)
    # v* = (0, -1) realizes the best halfspace error.
    err = np.mean(y * (-X[:, 1]) <= 0)
    assert err == pytest.approx(0.25, abs=0.004)
    assert np.all(ds.bayes_predict(spec, X) == y)


def test_sampling_is_deterministic():
    spec = mixture_spec()
    X1, y1 = ds.sample(spec, stream_rng(42, 1), 5000)
    X2, y2 = ds.sample(spec, stream_rng(42, 1), 5000)
    assert np.array_equal(X1, X2) and np.array_equal(y1, y2)
    X3, _ = ds.sample(spec, stream_rng(43, 1), 5000)
    assert not np.array_equal(X1, X3)


def test_analytic_profile():
    prof = ds.analytic_profile(mixture_spec())
    assert prof.hard_margin == 0.5
    assert np.array_equal(prof.v_star, [1.0, 0.0])
    assert prof.subexp_norm is None
    prof2 = ds.analytic_profile(ds.DistributionSpec(ds.ABSOLUTE_BOUNDARY, b=1.0))
    assert prof2.bayes_risk == 0.0
    assert prof2.anticoncentration == 1.0
    assert prof2.subexp_norm == pytest.approx(math.sqrt(math.pi / 2.0))
    assert np.array_equal(prof2.v_star, [0.0, -1.0])


def test_soft_margin_estimator():
    spec = ds.DistributionSpec(ds.ABSOLUTE_BOUNDARY, b=1.0)
    X, _ = ds.sample(spec, stream_rng(10, 0), 100_000)
    # Projections onto any unit vector are standard normal, so the band
    # mass is Phi(g) - Phi(-g); anti-concentration bound 2 * 1 * g holds.
    margins = ds.estimate_soft_margin(X, np.array([0.0, -1.0]), [0.1, 0.5, 1.0])
    for g, freq in margins.items():
        expected = math.erf(g / math.sqrt(2.0))
        assert freq == pytest.approx(expected, abs=0.005)
        assert freq <= 2.0 * g + 0.005
    # Hard margin: the mixture has zero mass within gamma0 of the separator.
    Xm, _ = ds.sample(mixture_spec(), stream_rng(10, 1), 50_000)
    hm = ds.estimate_soft_margin(Xm, np.array([1.0, 0.0]), [0.25, 0.49])
    assert all(v == 0.0 for v in hm.values())
    with pytest.raises(ds.DistributionError):
        ds.estimate_soft_margin(X, np.array([2.0, 0.0]), [0.1])


def test_subexp_norm_gaussian():
    spec = ds.DistributionSpec(ds.ABSOLUTE_BOUNDARY, b=1.0)
    X, _ = ds.sample(spec, stream_rng(11, 0), 1_000_000)
    c = ds.estimate_subexp_norm(X, stream_rng(11, 1))
    # The exact value for a standard normal marginal is sqrt(pi/2) ~ 1.2533.
    assert 0.5 <= c <= 2.0


def test_subexp_norm_flags_heavy_tails():
    def heavy(rng, n):
        X = rng.standard_t(2, size=(n, 2)) * 20.0
        return X, np.ones(n, dtype=np.int64)

    spec = ds.DistributionSpec(ds.CUSTOM, sampler=heavy)
    X, _ = ds.sample(spec, stream_rng(12, 0), 200_000)
    c = ds.estimate_subexp_norm(X, stream_rng(12, 1))
    assert c > 10.0 or math.isinf(c)


def test_sample_serialization_round_trips():
    X, y = ds.sample(mixture_spec(), stream_rng(13, 0), 500)
    X2, y2 = ds.samples_from_csv(ds.samples_to_csv(X, y))
    assert np.array_equal(X, X2) and np.array_equal(y, y2)
    X3, y3 = ds.samples_from_bytes(ds.samples_to_bytes(X, y))
    assert np.array_equal(X, X3) and np.array_equal(y, y3)


def test_custom_sampler_pass_through():
    def constant(rng, n):
        return np.ones((n, 2)), np.full(n, -1)

    spec = ds.DistributionSpec(ds.CUSTOM, sampler=constant)
    X, y = ds.sample(spec, stream_rng(0, 0), 7)
    assert np.all(X == 1.0) and np.all(y == -1)
    with pytest.raises(ds.DistributionError):
        spec.to_config()
