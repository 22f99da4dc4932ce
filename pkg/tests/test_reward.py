import math

import pytest
from hypothesis import given, strategies as st

from latnas.errors import NonPositiveLatency
from latnas.reward import Measurement, RewardConfig, calibrate_exponent, reward


HARD = RewardConfig.hard(80.0)
SOFT = RewardConfig.soft(80.0)


def test_on_target_latency_returns_accuracy_everywhere():
    for cfg in (HARD, SOFT, RewardConfig.custom(80.0, -0.3, -0.9)):
        assert reward(Measurement(0.5, 80.0), cfg) == 0.5


def test_hard_mode_double_latency():
    assert reward(Measurement(0.5, 160.0), HARD) == pytest.approx(0.25)


def test_soft_mode_double_latency():
    assert reward(Measurement(0.5, 160.0), SOFT) == pytest.approx(0.5 * 2 ** -0.07)
    assert reward(Measurement(0.5, 160.0), SOFT) == pytest.approx(0.47632, abs=1e-5)


def test_hard_mode_plateau_is_exact():
    for lat in (0.1, 1.0, 40.0, 79.999, 80.0):
        assert reward(Measurement(0.73, lat), HARD) == 0.73


def test_nonpositive_latency_rejected():
    with pytest.raises(NonPositiveLatency):
        Measurement(0.5, 0.0)
    with pytest.raises(NonPositiveLatency):
        Measurement(0.5, -3.0)


def test_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(80.0, 0.0, -0.5, "hard")
    with pytest.raises(ValueError):
        RewardConfig(80.0, -0.1, -0.2, "soft")
    with pytest.raises(ValueError):
        RewardConfig.custom(80.0, 0.5, -1.0)  # positive exponent
    with pytest.raises(ValueError):
        RewardConfig.soft(0.0)


@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(1.0, 300.0))
def test_strictly_increasing_in_accuracy(a1, a2, lat):
    if a1 == a2:
        return
    lo, hi = sorted([a1, a2])
    for cfg in (HARD, SOFT):
        assert reward(Measurement(lo, lat), cfg) < reward(Measurement(hi, lat), cfg)


@given(st.floats(1.0, 300.0), st.floats(1.0, 300.0))
def test_nonincreasing_in_latency(l1, l2):
    lo, hi = sorted([l1, l2])
    for cfg in (HARD, SOFT, RewardConfig.custom(80.0, -0.02, -0.4)):
        assert reward(Measurement(0.6, lo), cfg) >= reward(Measurement(0.6, hi), cfg)


def test_continuity_at_target():
    eps = 1e-9
    for cfg in (HARD, SOFT, RewardConfig.custom(80.0, -0.5, -0.9)):
        below = reward(Measurement(0.5, 80.0 - eps), cfg)
        above = reward(Measurement(0.5, 80.0 + eps), cfg)
        assert below == pytest.approx(above, abs=1e-9)


def test_scales_linearly_with_accuracy():
    r1 = reward(Measurement(0.3, 120.0), SOFT)
    r2 = reward(Measurement(0.6, 120.0), SOFT)
    assert r2 == pytest.approx(2 * r1)


class TestCalibrateExponent:
    def test_five_percent_gain_matches_reference_setting(self):
        e = calibrate_exponent(0.05)
        assert -0.071 <= e <= -0.070
        assert e == pytest.approx(-0.0704, abs=1e-3)

    def test_vanishing_gain_gives_vanishing_exponent(self):
        assert abs(calibrate_exponent(1e-9)) < 1e-8

    def test_doubling_latency_costs_exactly_the_gain_factor(self):
        gain = 0.08
        cfg = RewardConfig.soft(80.0, calibrate_exponent(gain))
        at_t = reward(Measurement(0.5, 80.0), cfg)
        at_2t = reward(Measurement(0.5, 160.0), cfg)
        assert at_2t == pytest.approx(at_t / (1 + gain), rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            calibrate_exponent(0.0)
        with pytest.raises(ValueError):
            calibrate_exponent(1.0)
