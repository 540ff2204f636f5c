import numpy as np
import pytest

from discbandit import environments as envs
from discbandit.core import ConfigError
from discbandit.engine import (
    EnvSpec,
    aggregate,
    build_environment,
    concentration_check,
    concentration_rates,
    log_growth,
    run_trial,
    run_trials,
)
from discbandit.environments import IIDArm, RottingArm
from discbandit.policies import PolicySpec
from discbandit.weights import WeightScheme

POLICIES = [PolicySpec(k) for k in ("weighted_ucb", "disc_ucb", "ucb1", "exp3")]


@pytest.mark.parametrize("policy", POLICIES, ids=lambda p: p.kind)
def test_single_arm_has_zero_dynamic_regret(policy):
    for family in ("rotting", "markov", "drifting"):
        r = run_trial(EnvSpec(family, 1), policy, 60, seed=3)
        assert r.delta_reg[-1] == 0.0


@pytest.mark.parametrize("policy", POLICIES, ids=lambda p: p.kind)
def test_equal_means_give_zero_regret(policy):
    r = run_trial(EnvSpec("iid", 4, {"means": [0.4] * 4}), policy, 200, seed=1)
    assert r.delta_reg[-1] == 0.0 and r.reg[-1] == 0.0


def test_trial_is_deterministic():
    spec = EnvSpec("periodic", 3, {"period_length": 5})
    a = run_trial(spec, PolicySpec(), 50, seed=9)
    b = run_trial(spec, PolicySpec(), 50, seed=9)
    for f in ("arms", "rewards", "cum_reward", "delta_reg", "reg"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_trial_rows_are_consistent():
    r = run_trial(EnvSpec("rotting", 4), PolicySpec(), 300, seed=0)
    assert r.T == 300
    np.testing.assert_allclose(r.avg_reward, r.cum_reward / np.arange(1, 301), rtol=0, atol=1e-12)
    assert np.all(np.diff(r.delta_reg) >= 0)
    assert np.all(r.delta_reg >= r.reg)
    assert r.arms[:4].tolist() == [0, 1, 2, 3]


def test_ledger_snapshot_precedes_pull():
    # the trace entry for round t must equal the chosen arm's mean before its pull
    r = run_trial(EnvSpec("rotting", 3), PolicySpec(), 100, seed=2)
    counts = np.zeros(3, dtype=int)
    thetas = envs.rotting_thetas(3)
    for t, a in enumerate(r.arms):
        counts[a] += 1
        assert r.ledger.chosen_means[t] == pytest.approx(counts[a] ** -thetas[a])


def test_trial_errors_before_round_one():
    with pytest.raises(ConfigError):
        run_trial(EnvSpec("iid", 5), PolicySpec(), 4)
    with pytest.raises(ConfigError):
        EnvSpec("nope", 3)
    with pytest.raises(ConfigError):
        EnvSpec("iid", 0)
    with pytest.raises(ConfigError):
        run_trial(EnvSpec("periodic", 3), PolicySpec(), 10)


def test_single_trial_aggregate():
    agg = run_trials(EnvSpec("iid", 3), PolicySpec(), 40, 1, seed=5)
    r = run_trial(EnvSpec("iid", 3), PolicySpec(), 40, seed=5, trial_index=0)
    np.testing.assert_array_equal(agg.mean_avg_reward, r.avg_reward)
    np.testing.assert_array_equal(agg.std_avg_reward, np.zeros(40))
    assert agg.n_trials == 1
    with pytest.raises(ConfigError):
        aggregate([])
    with pytest.raises(ConfigError):
        run_trials(EnvSpec("iid", 3), PolicySpec(), 40, 0)


def test_serial_and_parallel_are_bit_identical():
    spec, pol = EnvSpec("markov", 3), PolicySpec("exp3")
    a = run_trials(spec, pol, 50, 4, seed=11, workers=1)
    b = run_trials(spec, pol, 50, 4, seed=11, workers=2)
    for f in ("mean_avg_reward", "std_avg_reward", "mean_delta_reg"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    for x, y in zip(a.trials, b.trials):
        np.testing.assert_array_equal(x.arms, y.arms)


def test_trials_use_distinct_streams():
    agg = run_trials(EnvSpec("iid", 3), PolicySpec("exp3"), 60, 3, seed=0)
    assert not np.array_equal(agg.trials[0].arms, agg.trials[1].arms)


def test_trial_failures_name_the_trial():
    with pytest.raises(RuntimeError, match="trial 0"):
        run_trials(EnvSpec("mixed", 2, {"components": (("iid", 1), ("periodic", 1))}), PolicySpec(), 10, 1)


def test_mixed_build():
    spec = EnvSpec("mixed", 3, {"components": (("iid", 1), ("rotting", 2))})
    env = build_environment(spec, 100, envs.trial_seed(0, 0))
    assert env.families() == ["iid", "rotting", "rotting"]
    with pytest.raises(ConfigError):
        build_environment(EnvSpec("mixed", 4, {"components": (("iid", 1),)}), 100, 0)
    r = run_trial(spec, PolicySpec(), 200, seed=0)
    assert np.all(np.diff(r.delta_reg) >= 0)


def test_audit_stats_reported():
    r = run_trial(EnvSpec("periodic", 3, {"period_length": 4}), PolicySpec(), 300, seed=0)
    assert r.max_concentration >= 1.0
    r = run_trial(EnvSpec("periodic", 3, {"period_length": 4}), PolicySpec("exp3"), 300, seed=0)
    assert r.clipped_rewards == 0


def test_concentration_examples():
    arm = IIDArm(0.5)
    rates = concentration_rates(arm, WeightScheme(), 100, [0.5, 0.05], 20_000, seed=0)
    assert rates[0].violation_rate <= 0.5 and rates[1].violation_rate <= 0.05
    assert rates[0].upper_rate >= rates[1].upper_rate and rates[0].lower_rate >= rates[1].lower_rate
    flat = concentration_check(IIDArm(1.0), WeightScheme(), 50, 0.05, 1000)
    assert flat.violation_rate == 0.0
    with pytest.raises(ConfigError):
        concentration_check(arm, WeightScheme(), 10, 1.5, 10)


def test_concentration_on_a_nonstationary_arm():
    # removing the discrepancy leaves a martingale sum, so the bound still holds
    res = concentration_check(RottingArm(0.5), WeightScheme(), 60, 0.05, 5000, seed=1)
    assert res.violation_rate <= 0.05


def test_log_growth_returns_per_horizon():
    g = log_growth(EnvSpec("iid", 3), PolicySpec(), [30, 60], 3, seed=0)
    assert set(g) == {30, 60} and all(v >= 0 for v in g.values())
