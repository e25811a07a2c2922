"""Normal CDF / quantile against an arbitrary-precision oracle."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfspace_sgd.normal import normal_cdf, normal_pdf, normal_quantile

mp.mp.dps = 40


def oracle_cdf(x: float) -> float:
    return float(mp.ncdf(mp.mpf(x)))


def oracle_quantile(q: float) -> float:
    return float(mp.sqrt(2) * mp.erfinv(2 * mp.mpf(q) - 1))


def test_cdf_spot_values():
    # Frozen from mpmath.ncdf at 40 digits.
    assert normal_cdf(-3.7) == pytest.approx(1.077997334773883369e-4, rel=1e-14)
    assert normal_cdf(0.3) == pytest.approx(0.6179114221889526373, rel=1e-14)
    assert normal_cdf(2.5) == pytest.approx(0.9937903346742238648, rel=1e-14)
    assert normal_cdf(0.0) == 0.5


def test_quantile_spot_values():
    assert normal_quantile(0.001) == pytest.approx(-3.090232306167813542, rel=1e-12)
    assert normal_quantile(0.3) == pytest.approx(-0.5244005127080407840, rel=1e-12)
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054236, rel=1e-12)
    assert normal_quantile(0.5) == pytest.approx(0.0, abs=1e-15)


def test_cdf_dense_grid_against_oracle():
    for x in np.linspace(-8.0, 8.0, 321):
        assert normal_cdf(float(x)) == pytest.approx(oracle_cdf(float(x)),
                                                     rel=1e-13, abs=1e-300)


def test_quantile_dense_grid_against_oracle():
    for q in np.concatenate([np.geomspace(1e-12, 0.5, 60),
                             1.0 - np.geomspace(1e-12, 0.5, 60)]):
        assert normal_quantile(float(q)) == pytest.approx(
            oracle_quantile(float(q)), rel=1e-11, abs=1e-11)


@given(st.floats(min_value=-37.0, max_value=5.0))
def test_quantile_inverts_cdf(x):
    # Above ~5.5 the round trip is limited by the float resolution of
    # q ~= 1, not by the quantile code, so the range is asymmetric.
    q = normal_cdf(x)
    if 0.0 < q < 1.0:
        assert normal_quantile(q) == pytest.approx(x, abs=1e-8 * max(1.0, abs(x)))


def test_quantile_rejects_bad_args():
    for q in (0.0, 1.0, -0.2, 1.5, math.nan):
        with pytest.raises(ValueError):
            normal_quantile(q)


def test_pdf_matches_formula():
    for x in (-2.5, 0.0, 1.3):
        assert normal_pdf(x) == pytest.approx(
            math.exp(-x * x / 2.0) / math.sqrt(2.0 * math.pi), rel=1e-15)
