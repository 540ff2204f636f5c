import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discbandit import environments as envs
from discbandit.core import ArmHistory, ConfigError, EmptyHistoryError, NoSupportError
from discbandit.environments import (
    DriftingArm,
    IIDArm,
    MarkovArm,
    PeriodicArm,
    RarelyChangingArm,
    RottingArm,
    TrendArm,
)
from discbandit.weights import (
    SchemeKind,
    WeightAudit,
    WeightScheme,
    phase_matched_weights,
    recent_window_weights,
    resolve_scheme,
    scheme_for_arm,
    since_change_weights,
    state_matched_weights,
    trend_matched_weights,
    uniform_weights,
    weights_for,
    window_size,
)


def hist(rewards):
    return ArmHistory.from_rewards(list(rewards))


def blank(n):
    return hist([0.0] * n)


# --- constructors ----------------------------------------------------------


def test_uniform_examples():
    q = uniform_weights(blank(4))
    np.testing.assert_array_equal(q.weights, [0.25] * 4)
    assert q.norm2 == pytest.approx(0.5)
    q = uniform_weights(blank(1))
    assert q.weights.tolist() == [1.0] and q.norm2 == 1.0
    assert uniform_weights(blank(100)).concentration == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(EmptyHistoryError):
        uniform_weights(ArmHistory(0))


def test_since_change_examples():
    q = since_change_weights(blank(6), [1, 4])
    np.testing.assert_allclose(q.weights, [0, 0, 0, 1 / 3, 1 / 3, 1 / 3])
    np.testing.assert_array_equal(since_change_weights(blank(9), [1]).weights, uniform_weights(blank(9)).weights)
    q = since_change_weights(blank(5), [1, 5])
    assert q.weights.tolist() == [0, 0, 0, 0, 1.0] and q.norm2 == 1.0
    # change points beyond the history are ignored
    np.testing.assert_array_equal(since_change_weights(blank(3), [1, 10]).weights, uniform_weights(blank(3)).weights)
    assert since_change_weights(blank(6), [1, 4]).concentration == pytest.approx(6 / 3)


def test_state_matched_examples():
    q = state_matched_weights(hist([1, 0, 1, 0]), current_state=0)
    assert q.weights.tolist() == [0, 0, 1.0, 0]
    q = state_matched_weights(hist([0.4] * 5), current_state=0.4)
    np.testing.assert_allclose(q.weights, [0, 0.25, 0.25, 0.25, 0.25])
    q = state_matched_weights(hist([1, 0, 0, 1, 0, 0, 0, 0]), current_state=1)
    assert np.count_nonzero(q.weights) == 2 and q.norm2**2 == pytest.approx(0.5)
    with pytest.raises(NoSupportError):
        state_matched_weights(hist([1, 0]), current_state=0)


def test_state_matched_defaults_to_latest_reward():
    a = state_matched_weights(hist([1, 0, 1, 1, 0]))
    b = state_matched_weights(hist([1, 0, 1, 1, 0]), current_state=0)
    np.testing.assert_array_equal(a.weights, b.weights)
    q = state_matched_weights(hist([1, 0]), current_state=1, initial_value=1)
    assert q.weights.tolist() == [0.5, 0.5]


def test_phase_matched_examples():
    q = phase_matched_weights(blank(7), 3)
    np.testing.assert_allclose(q.weights, [0, 0.5, 0, 0, 0.5, 0, 0])
    np.testing.assert_array_equal(phase_matched_weights(blank(5), 1).weights, uniform_weights(blank(5)).weights)
    q = phase_matched_weights(blank(9), 3)
    assert np.count_nonzero(q.weights) == 3
    assert q.concentration == pytest.approx(3.0) and q.concentration <= 2 * 3
    with pytest.raises(NoSupportError):
        phase_matched_weights(blank(2), 3)


def test_phase_matched_blocks():
    # blocks of 2 pulls cycling over 3 phases; pull 7 opens phase 0 again
    q = phase_matched_weights(blank(6), 3, block_length=2)
    np.testing.assert_allclose(q.weights, [0.5, 0.5, 0, 0, 0, 0])


def test_trend_matched_examples():
    table = (0.1, 1.0, 3.0)
    q = trend_matched_weights(blank(6), table)
    # R(7) = table[1]; matches at pulls 1 and 4
    np.testing.assert_allclose(q.weights, [0.5, 0, 0, 0.5, 0, 0])
    np.testing.assert_array_equal(trend_matched_weights(blank(6), (2.0,)).weights, uniform_weights(blank(6)).weights)
    q = trend_matched_weights(blank(6), table, next_pull=False)
    np.testing.assert_allclose(q.weights, [0, 0, 0.5, 0, 0, 0.5])
    with pytest.raises(NoSupportError):
        trend_matched_weights(blank(1), table)


def test_recent_window_examples():
    np.testing.assert_array_equal(recent_window_weights(blank(100), 1.5).weights, uniform_weights(blank(100)).weights)
    q = recent_window_weights(blank(64), 0.75)
    assert np.count_nonzero(q.weights) == 8 and np.all(q.weights[-8:] == 1 / 8)
    assert window_size(27, 1.5 * 2 / 3 * 0.5) == 3
    assert window_size(1, 0.1) == 1
    with pytest.raises(ConfigError):
        recent_window_weights(blank(3), 0.0)


def test_recent_window_discrepancy_chain_bound():
    step = envs.drift_step(2000)
    rng = np.random.default_rng(5)
    for gamma in (0.5, 2 / 3, 1.0):
        arm = DriftingArm(0.5, step)
        for n in range(1, 600):
            arm.pull(rng)
            q = recent_window_weights(blank(n), gamma)
            s = np.arange(1, n + 1)
            chain = math.fsum(q.weights * (n + 1 - s) * step)
            assert abs(arm.discrepancy(q)) <= chain + 1e-12
            assert chain <= window_size(n, gamma) * step + 1e-12


# --- dispatch --------------------------------------------------------------


def test_weights_for_dispatch_identity():
    h = blank(7)
    np.testing.assert_array_equal(weights_for(WeightScheme(), h).weights, uniform_weights(h).weights)
    q = weights_for(WeightScheme(SchemeKind.PHASE_MATCHED, period=3), h)
    np.testing.assert_array_equal(q.weights, phase_matched_weights(h, 3).weights)


def test_weights_for_falls_back_and_counts():
    audit = WeightAudit()
    h = hist([1, 0])
    q = weights_for(WeightScheme(SchemeKind.STATE_MATCHED), h, audit=audit)
    np.testing.assert_array_equal(q.weights, uniform_weights(h).weights)
    assert audit.fallbacks == 1 and audit.calls == 1
    weights_for(WeightScheme(SchemeKind.STATE_MATCHED), hist([1, 1]), audit=audit)
    assert audit.fallbacks == 1 and audit.calls == 2


def test_scheme_validation():
    with pytest.raises(ConfigError):
        WeightScheme(SchemeKind.PHASE_MATCHED, period=0)
    with pytest.raises(ConfigError):
        WeightScheme(SchemeKind.RECENT_WINDOW, window_exponent=-1)
    with pytest.raises(ConfigError):
        resolve_scheme("nonsense", IIDArm(0.5))
    with pytest.raises(ConfigError):
        resolve_scheme("phase_matched", IIDArm(0.5))


def test_auto_schemes():
    assert scheme_for_arm(IIDArm(0.5)).kind is SchemeKind.UNIFORM
    assert resolve_scheme("auto", RottingArm(1.0)).kind is SchemeKind.UNIFORM
    s = scheme_for_arm(PeriodicArm([1, 2, 3], 50))
    assert (s.kind, s.period, s.block_length) == (SchemeKind.PHASE_MATCHED, 3, 50)
    assert scheme_for_arm(RarelyChangingArm([0.1, 0.2], [1, 9])).change_points == (1, 9)
    assert scheme_for_arm(TrendArm(1.0)).kind is SchemeKind.TREND_MATCHED
    assert scheme_for_arm(MarkovArm(np.eye(2), [0, 1])).kind is SchemeKind.STATE_MATCHED
    assert scheme_for_arm(DriftingArm(0.5, 0.01)).kind is SchemeKind.RECENT_WINDOW


# --- properties ------------------------------------------------------------

SCHEMES = [
    WeightScheme(),
    WeightScheme(SchemeKind.SINCE_CHANGE, change_points=(1, 5, 12)),
    WeightScheme(SchemeKind.STATE_MATCHED),
    WeightScheme(SchemeKind.PHASE_MATCHED, period=3, block_length=2),
    WeightScheme(SchemeKind.TREND_MATCHED, trend_table=(0.1, 1.0, 3.0)),
    WeightScheme(SchemeKind.RECENT_WINDOW, window_exponent=0.7),
]


@settings(max_examples=200)
@given(st.sampled_from(SCHEMES), st.lists(st.sampled_from([0.0, 0.5, 1.0]), min_size=1, max_size=80))
def test_every_scheme_returns_a_distribution_on_pulls(scheme, rewards):
    q = weights_for(scheme, hist(rewards))
    assert len(q) == len(rewards)
    assert np.all(np.isfinite(q.weights)) and np.all(q.weights >= 0)
    assert abs(math.fsum(q.weights) - 1.0) <= 1e-12
    assert q.concentration >= 1.0 - 1e-12


@given(st.integers(1, 500), st.integers(1, 10), st.integers(1, 5))
def test_phase_concentration_audit(n, period, block):
    try:
        q = phase_matched_weights(blank(n), period, block)
    except NoSupportError:
        return
    if block == 1:
        assert q.concentration <= 2 * period + 1e-12


@given(st.integers(1, 300), st.lists(st.integers(2, 300), max_size=5))
def test_since_change_audit_is_count_over_window(n, extra):
    cps = [1] + sorted(set(extra))
    q = since_change_weights(blank(n), cps)
    window = np.count_nonzero(q.weights)
    assert q.concentration == pytest.approx(n / window)


def _history_of(arm, n, rng):
    return hist([arm.pull(rng) for _ in range(n)])


@pytest.mark.parametrize("seed", range(5))
def test_zero_discrepancy_pairings_on_long_histories(seed):
    rng = np.random.default_rng(seed)
    n = 1000
    iid = IIDArm(rng.uniform())
    h = _history_of(iid, n, rng)
    assert abs(iid.discrepancy(weights_for(WeightScheme(), h))) <= 1e-12

    cps = (1, 300, 700)
    rc = RarelyChangingArm(rng.uniform(size=3).tolist(), cps)
    h = _history_of(rc, n, rng)
    assert abs(rc.discrepancy(weights_for(scheme_for_arm(rc), h))) <= 1e-12

    per = PeriodicArm(rng.uniform(1, 10, size=4).tolist(), period_length=7)
    h = _history_of(per, n, rng)
    assert abs(per.discrepancy(weights_for(scheme_for_arm(per), h))) <= 1e-12

    tr = TrendArm(rng.uniform(0.1, 6))
    h = _history_of(tr, n, rng)
    assert abs(tr.discrepancy(weights_for(scheme_for_arm(tr), h))) <= 1e-12

    P = rng.dirichlet([2.0] * 3, size=3)
    mk = MarkovArm(P, [0.1, 0.5, 0.9])
    h = _history_of(mk, n, rng)
    assert abs(mk.discrepancy(weights_for(scheme_for_arm(mk), h))) <= 1e-12
