"""Trial orchestration, multi-trial aggregation and the concentration check."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import environments as envs
from .core import ArmHistory, ConfigError, RegretLedger, weighted_mean
from .policies import EXP3, IndexPolicy, PolicySpec, build_policy
from .weights import WeightScheme, weights_for

FAMILIES = (
    "iid",
    "complete_dependence",
    "rarely_changing",
    "rotting",
    "rotting_jumps",
    "markov",
    "periodic",
    "known_trend",
    "drifting",
    "mixed",
)


@dataclass(frozen=True)
class EnvSpec:
    """Declarative environment: a family, K, and family parameters.

    ``params`` keys by family: ``means`` (iid); ``max_segments``,
    ``noise_sd`` (rarely_changing, rotting_jumps); ``baseline`` (rotting);
    ``n_states`` (markov); ``period_length``, ``noise_sd`` (periodic);
    ``trend``, ``noise_sd`` (known_trend); ``components`` as
    ``((family, count), ...)`` (mixed).
    """

    family: str
    K: int
    params: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))

    def get(self, key, default=None):
        return dict(self.params).get(key, default)


def _family_env(family: str, K: int, T: int, seed, p: EnvSpec) -> envs.Environment:
    if family == "iid":
        return envs.make_iid(K, seed, p.get("means"))
    if family == "complete_dependence":
        return envs.make_complete_dependence(K, seed)
    if family == "rarely_changing":
        return envs.make_rarely_changing(K, T, seed, p.get("max_segments", 10), p.get("noise_sd", 0.1))
    if family == "rotting":
        return envs.make_rotting(K, seed, p.get("baseline", 0.0))
    if family == "rotting_jumps":
        rng = envs.child_rng(seed, envs.BUILD_STREAM)
        means, cps = [], []
        for _ in range(K):
            n = int(rng.integers(1, p.get("max_segments", 10) + 1))
            cps.append(envs.even_change_points(n, T))
            means.append(rng.uniform(0.0, 0.5, size=n))
        return envs.make_rotting_jumps(K, means, cps, list(envs.rotting_thetas(K)), seed, p.get("noise_sd", 0.1))
    if family == "markov":
        return envs.make_random_markov(K, seed, p.get("n_states", 2))
    if family == "periodic":
        if p.get("period_length") is None:
            raise ConfigError("periodic family needs period_length")
        return envs.make_periodic(K, p.get("period_length"), None, seed, p.get("noise_sd", 0.3))
    if family == "known_trend":
        return envs.make_trend(K, None, p.get("trend", envs.DEFAULT_TREND), seed, p.get("noise_sd", 0.3))
    if family == "drifting":
        return envs.make_drifting(K, T, seed)
    raise ConfigError(f"unknown family {family!r}")


def build_environment(spec: EnvSpec, T: int, seed) -> envs.Environment:
    seed = envs.as_seed_sequence(seed)
    if spec.family != "mixed":
        return _family_env(spec.family, spec.K, T, seed, spec)
    components = spec.get("components")
    if not components:
        raise ConfigError("mixed family needs components")
    if sum(n for _, n in components) != spec.K:
        raise ConfigError(f"mixed components add up to {sum(n for _, n in components)} arms, K={spec.K}")
    arms = []
    for j, (family, n) in enumerate(components):
        if family == "mixed":
            raise ConfigError("mixed components cannot be mixed")
        sub = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (envs.BUILD_STREAM, j))
        arms.extend(_family_env(family, n, T, sub, spec).arms)
    return envs.make_mixed(arms, seed)


@dataclass
class TrialResult:
    arms: np.ndarray
    rewards: np.ndarray
    cum_reward: np.ndarray
    delta_reg: np.ndarray
    reg: np.ndarray
    ledger: RegretLedger | None
    max_concentration: float = 0.0
    fallbacks: int = 0
    clipped_rewards: int = 0

    @property
    def T(self) -> int:
        return self.arms.size

    @property
    def avg_reward(self) -> np.ndarray:
        return self.cum_reward / np.arange(1, self.T + 1)


def run_trial(
    env_spec: EnvSpec,
    policy_spec: PolicySpec,
    T: int,
    seed: int = 0,
    trial_index: int = 0,
    keep_ledger: bool = True,
) -> TrialResult:
    """One trial: snapshot means, select, pull, update the ledger and the policy."""
    if T < env_spec.K:
        raise ConfigError(f"T={T} must be at least K={env_spec.K}")
    env = build_environment(env_spec, T, envs.trial_seed(seed, trial_index))
    policy = build_policy(policy_spec, env, T)
    ledger = RegretLedger(env.n_arms)

    arms = np.zeros(T, dtype=np.int64)
    rewards = np.zeros(T)
    cum = np.zeros(T)
    dreg = np.zeros(T)
    reg = np.zeros(T)
    for t in range(1, T + 1):
        # conditional on X_1^{t-1}: snapshot before the state-advancing pull
        means = env.next_means()
        arm = policy.select(t)
        x = env.pull(arm)
        ledger.update(means, arm, x)
        policy.update(arm, t, x)
        arms[t - 1] = arm
        rewards[t - 1] = x
        cum[t - 1] = ledger.cum_reward
        dreg[t - 1] = ledger.delta_reg
        reg[t - 1] = ledger.reg

    result = TrialResult(arms, rewards, cum, dreg, reg, ledger if keep_ledger else None)
    if isinstance(policy, IndexPolicy):
        result.max_concentration = policy.audit.max_concentration
        result.fallbacks = policy.audit.fallbacks
    if isinstance(policy, EXP3):
        result.clipped_rewards = policy.clipped
    return result


@dataclass
class AggregateResult:
    mean_avg_reward: np.ndarray
    std_avg_reward: np.ndarray
    mean_delta_reg: np.ndarray
    trials: list[TrialResult] = field(default_factory=list)

    @property
    def n_trials(self) -> int:
        return len(self.trials)


def aggregate(trials: Sequence[TrialResult]) -> AggregateResult:
    if not trials:
        raise ConfigError("need at least one trial")
    avg = np.vstack([r.avg_reward for r in trials])
    dreg = np.vstack([r.delta_reg for r in trials])
    return AggregateResult(avg.mean(axis=0), avg.std(axis=0), dreg.mean(axis=0), list(trials))


def _trial_job(args) -> TrialResult:
    env_spec, policy_spec, T, seed, i, keep = args
    try:
        return run_trial(env_spec, policy_spec, T, seed, i, keep)
    except Exception as exc:
        raise RuntimeError(f"trial {i} failed: {exc}") from exc


def run_trials(
    env_spec: EnvSpec,
    policy_spec: PolicySpec,
    T: int,
    trials: int,
    seed: int = 0,
    workers: int = 1,
    keep_ledger: bool = False,
) -> AggregateResult:
    """Run ``trials`` independent trials; results never depend on ``workers``."""
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    jobs = [(env_spec, policy_spec, T, seed, i, keep_ledger) for i in range(trials)]
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=min(workers, trials)) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]
    return aggregate(results)


def run_experiment(config, workers: int = 1, keep_ledger: bool = False) -> AggregateResult:
    """Run an object carrying ``env``, ``policy``, ``T``, ``trials`` and ``seed``."""
    return run_trials(config.env, config.policy, config.T, config.trials, config.seed, workers, keep_ledger)


@dataclass(frozen=True)
class ConcentrationResult:
    delta: float
    upper_rate: float
    lower_rate: float
    replicates: int

    @property
    def violation_rate(self) -> float:
        return max(self.upper_rate, self.lower_rate)


def concentration_deviations(arm: envs.ArmProcess, scheme: WeightScheme, t: int, replicates: int, seed=0):
    """Per replicate: ``next_mean - sum q X - D`` and ``norm2`` after ``t`` fresh pulls.

    ``next_mean - D`` is the q-weighted sum of past conditional means, so the
    deviation is the weighted martingale sum the concentration bound controls.
    """
    if replicates < 1 or t < 1:
        raise ConfigError("need t >= 1 and replicates >= 1")
    rng = np.random.default_rng(seed)
    dev = np.zeros(replicates)
    norms = np.zeros(replicates)
    for k in range(replicates):
        arm.reset()
        x = arm.simulate(t, rng)
        h = ArmHistory.from_arrays(x)
        q = weights_for(scheme, h)
        dev[k] = arm.next_mean() - weighted_mean(h, q) - arm.discrepancy(q)
        norms[k] = q.norm2
    arm.reset()
    return dev, norms


def concentration_rates(arm, scheme, t, deltas, replicates, seed=0) -> list[ConcentrationResult]:
    dev, norms = concentration_deviations(arm, scheme, t, replicates, seed)
    out = []
    for delta in deltas:
        if not 0.0 < delta < 1.0:
            raise ConfigError(f"delta must be in (0, 1), got {delta}")
        bound = norms * math.sqrt(math.log(1.0 / delta) / 2.0)
        out.append(
            ConcentrationResult(
                float(delta), float(np.mean(dev > bound)), float(np.mean(-dev > bound)), replicates
            )
        )
    return out


def concentration_check(arm, scheme, t: int, delta: float, replicates: int, seed=0) -> ConcentrationResult:
    """Empirical frequency with which either one-sided bound is violated."""
    return concentration_rates(arm, scheme, t, [delta], replicates, seed)[0]


def log_growth(
    env_spec: EnvSpec,
    policy_spec: PolicySpec,
    horizons: Sequence[int],
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> dict[int, float]:
    """Mean final dynamic regret for each horizon (separate runs per horizon)."""
    out = {}
    for T in horizons:
        agg = run_trials(env_spec, policy_spec, T, trials, seed, workers)
        out[T] = float(agg.mean_delta_reg[-1])
    return out
