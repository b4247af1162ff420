import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nakamoto_mfg.timing import (TimingParams, block_step_pmf, delay_steps, multi_block_step_pmf,
                                 reception_cdf, reception_cdf_series, reception_cdf_series_table,
                                 reception_pmf)

DEFAULT = TimingParams(0.001, 0.01)


def test_miss_ratio_by_direct_summation():
    # E[(1 - delta)^k] with k ~ Geometric(alpha), summed term by term
    a, d = 0.001, 0.01
    k = np.arange(1, 200_000)
    direct = np.sum(a * (1 - a) ** (k - 1) * (1 - d) ** k)
    assert abs(DEFAULT.miss_ratio - direct) < 1e-12
    assert abs(reception_pmf(DEFAULT, 1) - 0.9099181073703371) < 1e-15


def test_invalid_parameters():
    for a, d in [(0.0, 0.5), (1.0, 0.5), (0.1, 0.0), (0.1, 1.0)]:
        with pytest.raises(ValueError):
            TimingParams(a, d)
    with pytest.raises(ValueError):
        reception_pmf(DEFAULT, 0)
    with pytest.raises(ValueError):
        multi_block_step_pmf(DEFAULT, 0, 3)


def test_block_step_pmf_normalizes():
    p = TimingParams(0.05, 0.3)
    total = sum(block_step_pmf(p, k) for k in range(1, 2000))
    assert abs(total - 1.0) < 1e-10
    assert block_step_pmf(p, 0) == 0.0


@pytest.mark.parametrize("y", [1, 2, 5])
def test_multi_block_step_pmf(y):
    p = TimingParams(0.05, 0.3)
    vals = [multi_block_step_pmf(p, y, k) for k in range(0, 3000)]
    assert abs(sum(vals) - 1.0) < 1e-10
    if y == 1:
        assert all(abs(multi_block_step_pmf(p, 1, k) - block_step_pmf(p, k)) < 1e-15
                   for k in range(1, 50))


def test_multi_block_step_is_a_convolution():
    p = TimingParams(0.2, 0.3)
    for k in range(2, 30):
        conv = sum(block_step_pmf(p, j) * block_step_pmf(p, k - j) for j in range(1, k))
        assert abs(multi_block_step_pmf(p, 2, k) - conv) < 1e-14


def test_reception_pmf_and_cdf_agree():
    p = TimingParams(0.01, 0.05)
    acc = 0.0
    for h in range(1, 40):
        acc += reception_pmf(p, h)
        assert abs(acc - reception_cdf(p, h)) < 1e-12
    assert reception_cdf(p, 0) == 0.0
    assert abs(sum(reception_pmf(p, h) for h in range(1, 400)) - 1.0) < 1e-10


def test_series_matches_closed_form_small_case():
    p = TimingParams(0.2, 0.1)
    for h in (1, 2, 7):
        assert abs(reception_cdf_series(p, h) - reception_cdf(p, h)) < 1e-12
    assert reception_cdf_series(p, 0) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.002, 0.5), st.floats(0.002, 0.9), st.integers(1, 30))
def test_series_matches_closed_form_random(alpha, delta, h):
    p = TimingParams(alpha, delta)
    table = reception_cdf_series_table(alpha, [delta], h)
    assert abs(table[0, h - 1] - reception_cdf(p, h)) < 1e-10


def test_cdf_monotone():
    vals = [reception_cdf(DEFAULT, h) for h in range(0, 50)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[1] < 1.0 and vals[-1] <= 1.0


@pytest.mark.parametrize("rho,expected", [(0.5, 69), (0.9, 230), (0.99, 459)])
def test_delay_steps(rho, expected):
    # smallest k with 1 - 0.99^k >= rho
    assert delay_steps(0.01, rho) == expected
    k = expected
    assert 1 - 0.99 ** k >= rho > 1 - 0.99 ** (k - 1)


def test_delay_steps_theoretical_efficiency():
    eff = {rho: 1 / (1 + 0.001 * delay_steps(0.01, rho)) for rho in (0.5, 0.9, 0.99)}
    assert math.isclose(eff[0.5], 1 / 1.069)
    assert math.isclose(eff[0.9], 1 / 1.23)
    assert math.isclose(eff[0.99], 1 / 1.459)


def test_delay_steps_rejects():
    with pytest.raises(ValueError):
        delay_steps(0.01, 1.0)
    with pytest.raises(ValueError):
        delay_steps(0.01, 0.0)
    with pytest.raises(ValueError):
        delay_steps(1.0, 0.5)
