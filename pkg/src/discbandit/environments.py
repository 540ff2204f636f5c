"""Rested stochastic-process arms and the environments built from them.

Every arm advances only when pulled. Before each pull the arm records the
conditional mean that generates the reward, so the discrepancy oracle is
exact for path-dependent families (Markov, drifting) as well.

Seeding: a trial is identified by a ``SeedSequence`` with spawn key
``(trial_index,)``. Child 0 seeds environment construction, child 1 the
policy, child ``2 + i`` the reward stream of arm ``i``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import ConfigError, ContractViolation, EmptyHistoryError, WeightVector

BUILD_STREAM = 0
POLICY_STREAM = 1
ARM_STREAM_OFFSET = 2

# Normal rewards are bounded in practice by mean +/- this many sd.
NORMAL_RANGE_SDS = 4.0


def trial_seed(root_seed: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root_seed, spawn_key=(trial_index,))


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child_rng(seed, index: int) -> np.random.Generator:
    """Deterministic child stream; does not mutate ``seed``."""
    ss = as_seed_sequence(seed)
    child = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (index,))
    return np.random.Generator(np.random.PCG64(child))


class ArmProcess:
    """Base class for a rested arm.

    Subclasses implement ``next_mean`` (pure in the local state) and
    ``_draw`` (sample the next value and advance the local state).
    """

    family = "base"

    def __init__(self):
        self.pull_count = 0
        self._means = np.zeros(8)

    def next_mean(self) -> float:
        raise NotImplementedError

    def _draw(self, rng: np.random.Generator, mean: float) -> float:
        raise NotImplementedError

    def _reset_state(self) -> None:
        pass

    @property
    def reward_range(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def pull(self, rng: np.random.Generator) -> float:
        m = self.next_mean()
        x = float(self._draw(rng, m))
        if self.pull_count == len(self._means):
            self._means = np.concatenate([self._means, np.zeros_like(self._means)])
        self._means[self.pull_count] = m
        self.pull_count += 1
        return x

    def simulate(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Pull ``n`` times; returns the rewards."""
        return np.array([self.pull(rng) for _ in range(n)])

    @property
    def past_means(self) -> np.ndarray:
        """Conditional mean in force just before each past pull."""
        return self._means[: self.pull_count]

    def reset(self) -> None:
        self.pull_count = 0
        self._reset_state()

    def discrepancy(self, q: WeightVector) -> float:
        if self.pull_count == 0:
            raise EmptyHistoryError(f"{self.family} arm has no pulls")
        if len(q) != self.pull_count:
            raise ContractViolation(f"weight length {len(q)} != pull count {self.pull_count}")
        return self.next_mean() - math.fsum(q.weights * self.past_means)


def _normal_range(lo_mean: float, hi_mean: float, sd: float) -> tuple[float, float]:
    return (lo_mean - NORMAL_RANGE_SDS * sd, hi_mean + NORMAL_RANGE_SDS * sd)


class IIDArm(ArmProcess):
    family = "iid"

    def __init__(self, mean: float, noise: str = "bernoulli", sd: float = 0.0):
        super().__init__()
        if noise not in ("bernoulli", "normal"):
            raise ConfigError(f"unknown noise {noise!r}")
        if noise == "bernoulli" and not 0.0 <= mean <= 1.0:
            raise ConfigError(f"Bernoulli mean {mean} outside [0, 1]")
        self.mean = float(mean)
        self.noise = noise
        self.sd = float(sd)

    def next_mean(self) -> float:
        return self.mean

    def _draw(self, rng, mean):
        if self.noise == "bernoulli":
            return 1.0 if rng.random() < mean else 0.0
        return rng.normal(mean, self.sd)

    def simulate(self, n, rng):
        if self.pull_count + n > len(self._means):
            self._means = np.concatenate([self._means[: self.pull_count], np.zeros(n + len(self._means))])
        self._means[self.pull_count : self.pull_count + n] = self.mean
        self.pull_count += n
        if self.noise == "bernoulli":
            return (rng.random(n) < self.mean).astype(np.float64)
        return rng.normal(self.mean, self.sd, size=n)

    @property
    def reward_range(self):
        if self.noise == "bernoulli":
            return (0.0, 1.0)
        return _normal_range(self.mean, self.mean, self.sd)


class CompleteDependenceArm(ArmProcess):
    """First pull is Bernoulli(p); every later pull repeats it."""

    family = "complete_dependence"

    def __init__(self, p: float):
        super().__init__()
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"probability {p} outside [0, 1]")
        self.p = float(p)
        self.first = None

    def next_mean(self):
        return self.p if self.first is None else self.first

    def _draw(self, rng, mean):
        if self.first is None:
            self.first = 1.0 if rng.random() < self.p else 0.0
        return self.first

    def _reset_state(self):
        self.first = None


class RottingArm(ArmProcess):
    """Bernoulli arm whose mean for pull ``s`` is ``baseline + s**-theta``, clipped to [0, 1]."""

    family = "rotting"

    def __init__(self, theta: float, baseline: float = 0.0):
        super().__init__()
        if theta <= 0:
            raise ConfigError(f"theta must be positive, got {theta}")
        self.theta = float(theta)
        self.baseline = float(baseline)

    def next_mean(self):
        m = self.baseline + (self.pull_count + 1) ** -self.theta
        return min(max(m, 0.0), 1.0)

    def _draw(self, rng, mean):
        return 1.0 if rng.random() < mean else 0.0


def _check_change_points(change_points: Sequence[int]) -> list[int]:
    cps = [int(c) for c in change_points]
    if not cps or cps[0] != 1:
        raise ConfigError("change points must start at pull 1")
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ConfigError(f"change points must be strictly increasing: {cps}")
    return cps


class _SegmentedArm(ArmProcess):
    def __init__(self, segment_means, change_points):
        super().__init__()
        self.change_points = _check_change_points(change_points)
        self.segment_means = [float(m) for m in segment_means]
        if len(self.segment_means) != len(self.change_points):
            raise ConfigError("need one segment mean per change point")

    def _segment(self, pull_index: int) -> int:
        # last change point <= pull_index
        j = 0
        for k, c in enumerate(self.change_points):
            if c <= pull_index:
                j = k
            else:
                break
        return j


class RarelyChangingArm(_SegmentedArm):
    """Normal rewards whose mean is piecewise constant in the pull index."""

    family = "rarely_changing"

    def __init__(self, segment_means, change_points, sd: float = 0.1):
        super().__init__(segment_means, change_points)
        self.sd = float(sd)

    def next_mean(self):
        return self.segment_means[self._segment(self.pull_count + 1)]

    def _draw(self, rng, mean):
        return rng.normal(mean, self.sd)

    @property
    def reward_range(self):
        return _normal_range(min(self.segment_means), max(self.segment_means), self.sd)


class RottingJumpsArm(_SegmentedArm):
    """Rotting decay restarted at each change point, on top of a segment mean."""

    family = "rotting_jumps"

    def __init__(self, segment_means, change_points, theta: float, sd: float = 0.1):
        super().__init__(segment_means, change_points)
        if theta <= 0:
            raise ConfigError(f"theta must be positive, got {theta}")
        self.theta = float(theta)
        self.sd = float(sd)

    def next_mean(self):
        k = self.pull_count + 1
        j = self._segment(k)
        return self.segment_means[j] + (k - self.change_points[j] + 1) ** -self.theta

    def _draw(self, rng, mean):
        return rng.normal(mean, self.sd) if self.sd > 0 else mean

    @property
    def reward_range(self):
        return _normal_range(min(self.segment_means), max(self.segment_means) + 1.0, self.sd)


class MarkovArm(ArmProcess):
    """Finite Markov chain; each pull moves one step and emits the new state's reward."""

    family = "markov"

    def __init__(self, transition, state_rewards, initial_state: int = 0):
        super().__init__()
        P = np.asarray(transition, dtype=np.float64)
        r = np.asarray(state_rewards, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != r.size:
            raise ConfigError(f"transition matrix {P.shape} does not match {r.size} states")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigError("transition rows must be nonnegative and sum to 1")
        if not np.all(np.isfinite(r)):
            raise ConfigError("state rewards must be finite")
        if not 0 <= initial_state < r.size:
            raise ConfigError(f"initial state {initial_state} out of range")
        self.transition = P
        self.state_rewards = r
        self.initial_state = int(initial_state)
        self.state = self.initial_state
        self._cdf = np.cumsum(P, axis=1)
        self._row_means = P @ r

    @property
    def current_value(self) -> float:
        """Reward attached to the current state (last emission, or the initial state's)."""
        return float(self.state_rewards[self.state])

    def next_mean(self):
        return float(self._row_means[self.state])

    def _draw(self, rng, mean):
        row = self._cdf[self.state]
        nxt = int(np.searchsorted(row, rng.random() * row[-1], side="right"))
        self.state = min(nxt, row.size - 1)
        return self.state_rewards[self.state]

    def _reset_state(self):
        self.state = self.initial_state

    @property
    def reward_range(self):
        return (float(self.state_rewards.min()), float(self.state_rewards.max()))

    def stationary_distribution(self) -> np.ndarray:
        w, v = np.linalg.eig(self.transition.T)
        pi = np.real(v[:, np.argmin(np.abs(w - 1.0))])
        return pi / pi.sum()


class PeriodicArm(ArmProcess):
    """Normal rewards cycling through block means; each block lasts ``period_length`` pulls."""

    family = "periodic"

    def __init__(self, period_means, period_length: int = 1, sd: float = 0.3):
        super().__init__()
        self.period_means = [float(m) for m in period_means]
        if not self.period_means:
            raise ConfigError("periodic arm needs at least one period mean")
        if period_length < 1:
            raise ConfigError(f"period_length must be >= 1, got {period_length}")
        self.period_length = int(period_length)
        self.sd = float(sd)

    @property
    def n_periods(self) -> int:
        return len(self.period_means)

    def block(self, pull_index: int) -> int:
        return ((pull_index - 1) // self.period_length) % self.n_periods

    def next_mean(self):
        return self.period_means[self.block(self.pull_count + 1)]

    def _draw(self, rng, mean):
        return rng.normal(mean, self.sd)

    @property
    def reward_range(self):
        return _normal_range(min(self.period_means), max(self.period_means), self.sd)


def trend_value(trend_table: Sequence[float], pull_index: int) -> float:
    """Known trend: ``trend_table[pull_index mod len]``."""
    return float(trend_table[pull_index % len(trend_table)])


class TrendArm(ArmProcess):
    """Reward ``X' * R(s)`` with ``X' ~ Normal(mu, sd)`` and a known trend ``R`` of the pull index."""

    family = "known_trend"

    def __init__(self, mu: float, trend_table=(0.1, 1.0, 3.0), sd: float = 0.3):
        super().__init__()
        if len(trend_table) == 0:
            raise ConfigError("trend table must be nonempty")
        self.mu = float(mu)
        self.trend_table = tuple(float(r) for r in trend_table)
        self.sd = float(sd)

    def next_mean(self):
        return self.mu * trend_value(self.trend_table, self.pull_count + 1)

    def _draw(self, rng, mean):
        return rng.normal(self.mu, self.sd) * trend_value(self.trend_table, self.pull_count + 1)

    @property
    def reward_range(self):
        lo, hi = _normal_range(self.mu, self.mu, self.sd)
        ends = [lo * r for r in self.trend_table] + [hi * r for r in self.trend_table]
        return (min(ends), max(ends))


class DriftingArm(ArmProcess):
    """Bernoulli arm whose mean takes a +/- ``step`` fair-coin step after every pull, clipped to [0, 1]."""

    family = "drifting"

    def __init__(self, initial_mean: float, step: float):
        super().__init__()
        if step < 0:
            raise ConfigError("drift step must be nonnegative")
        self.initial_mean = min(max(float(initial_mean), 0.0), 1.0)
        self.step = float(step)
        self.mean = self.initial_mean

    def next_mean(self):
        return self.mean

    def _draw(self, rng, mean):
        x = 1.0 if rng.random() < mean else 0.0
        move = self.step if rng.random() < 0.5 else -self.step
        self.mean = min(max(self.mean + move, 0.0), 1.0)
        return x

    def _reset_state(self):
        self.mean = self.initial_mean


class Environment:
    """K independent rested arms, each with its own reward stream."""

    def __init__(self, arms: Sequence[ArmProcess], seed=None, reward_range: tuple[float, float] | None = None):
        if len(arms) == 0:
            raise ConfigError("environment needs at least one arm")
        self.arms = list(arms)
        self.seed = as_seed_sequence(seed)
        self._rngs = [child_rng(self.seed, ARM_STREAM_OFFSET + i) for i in range(len(self.arms))]
        self._next = np.array([a.next_mean() for a in self.arms], dtype=np.float64)
        if reward_range is None:
            ranges = [a.reward_range for a in self.arms]
            reward_range = (min(r[0] for r in ranges), max(r[1] for r in ranges))
        self.reward_range = reward_range

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    def pull(self, arm: int) -> float:
        if not 0 <= arm < len(self.arms):
            raise ContractViolation(f"arm {arm} out of range")
        a = self.arms[arm]
        x = a.pull(self._rngs[arm])
        self._next[arm] = a.next_mean()
        return x

    def next_means(self) -> np.ndarray:
        return self._next.copy()

    def discrepancy(self, arm: int, q: WeightVector) -> float:
        return self.arms[arm].discrepancy(q)

    def policy_rng(self) -> np.random.Generator:
        return child_rng(self.seed, POLICY_STREAM)

    def families(self) -> list[str]:
        return [a.family for a in self.arms]


def pull(env: Environment, arm: int) -> float:
    return env.pull(arm)


def next_means(env: Environment) -> np.ndarray:
    return env.next_means()


def discrepancy(env: Environment, arm: int, q: WeightVector) -> float:
    return env.discrepancy(arm, q)


# --- generators for the benchmark panels ---------------------------------


def _check_k(K: int) -> None:
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")


def _build_rng(seed) -> np.random.Generator:
    return child_rng(seed, BUILD_STREAM)


def make_iid(K: int, seed=None, means: Sequence[float] | None = None) -> Environment:
    _check_k(K)
    if means is None:
        means = [(i + 1) / K for i in range(K)]
    if len(means) != K:
        raise ConfigError(f"got {len(means)} means for K={K}")
    return Environment([IIDArm(m) for m in means], seed)


def make_complete_dependence(K: int, seed=None) -> Environment:
    _check_k(K)
    return Environment([CompleteDependenceArm((i + 1) / K) for i in range(K)], seed)


def even_change_points(n_segments: int, T: int) -> list[int]:
    """Segment starts ``1, 1 + T//N, 1 + 2T//N, ...`` for ``N`` segments."""
    return [1] + [1 + (j * T) // n_segments for j in range(1, n_segments)]


def make_rarely_changing(K: int, T: int, seed=None, max_segments: int = 10, sd: float = 0.1) -> Environment:
    _check_k(K)
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    rng = _build_rng(seed)
    arms = []
    for _ in range(K):
        n = int(rng.integers(1, max_segments + 1))
        cps = even_change_points(n, T)
        arms.append(RarelyChangingArm(rng.uniform(0.0, 1.0, size=n), cps, sd))
    return Environment(arms, seed)


def rotting_thetas(K: int) -> np.ndarray:
    return 0.1 + 10.0 * np.arange(K) / K


def make_rotting(K: int, seed=None, baseline: float = 0.0) -> Environment:
    _check_k(K)
    return Environment([RottingArm(th, baseline) for th in rotting_thetas(K)], seed)


def _depth(x) -> int:
    d = 0
    while isinstance(x, (list, tuple, np.ndarray)) and len(x):
        x = x[0]
        d += 1
    return d


def _per_arm(value, K: int, depth: int) -> list:
    """Broadcast a shared parameter (nesting ``depth``) to K arms."""
    if _depth(value) > depth:
        if len(value) != K:
            raise ConfigError(f"need {K} per-arm entries, got {len(value)}")
        return list(value)
    return [value] * K


def make_rotting_jumps(K: int, segment_means, change_points, theta, seed=None, sd: float = 0.1) -> Environment:
    _check_k(K)
    means = _per_arm(segment_means, K, 1)
    cps = _per_arm(change_points, K, 1)
    thetas = _per_arm(theta, K, 0)
    arms = [RottingJumpsArm(m, c, th, sd) for m, c, th in zip(means, cps, thetas)]
    return Environment(arms, seed)


def make_markov(K: int, transition_matrices, state_rewards, seed=None, initial_state: int = 0) -> Environment:
    _check_k(K)
    Ps = _per_arm(transition_matrices, K, 2)
    rs = _per_arm(state_rewards, K, 1)
    return Environment([MarkovArm(P, r, initial_state) for P, r in zip(Ps, rs)], seed)


def make_random_markov(K: int, seed=None, n_states: int = 2, concentration: float = 2.0) -> Environment:
    """Random chains: Dirichlet transition rows, distinct U(0,1) state rewards."""
    _check_k(K)
    if n_states < 1:
        raise ConfigError("n_states must be >= 1")
    rng = _build_rng(seed)
    arms = []
    for _ in range(K):
        P = rng.dirichlet(np.full(n_states, concentration), size=n_states)
        P /= P.sum(axis=1, keepdims=True)
        arms.append(MarkovArm(P, rng.uniform(0.0, 1.0, size=n_states)))
    return Environment(arms, seed)


PERIODIC_GRIDS = ((10.0, 20.0), (5.0, 9.0), (1.0, 4.0))


def make_periodic(K: int, period_length: int = 50, period_means=None, seed=None, sd: float = 0.3) -> Environment:
    _check_k(K)
    if period_means is None:
        grids = [np.linspace(lo, hi, K) for lo, hi in PERIODIC_GRIDS]
        period_means = [[g[i] for g in grids] for i in range(K)]
    period_means = _per_arm(period_means, K, 1)
    return Environment([PeriodicArm(m, period_length, sd) for m in period_means], seed)


DEFAULT_TREND = (0.1, 1.0, 3.0)


def make_trend(K: int, base_means=None, trend_table=DEFAULT_TREND, seed=None, sd: float = 0.3) -> Environment:
    _check_k(K)
    if len(trend_table) == 0:
        raise ConfigError("trend table must be nonempty")
    if base_means is None:
        base_means = np.linspace(0.1, 6.0, K)
    if len(base_means) != K:
        raise ConfigError(f"got {len(base_means)} base means for K={K}")
    return Environment([TrendArm(mu, trend_table, sd) for mu in base_means], seed)


def drift_step(T: int) -> float:
    return T ** (-2.0 / 3.0)


def make_drifting(K: int, T: int, seed=None) -> Environment:
    _check_k(K)
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    rng = _build_rng(seed)
    half = 1.0 / math.sqrt(T)
    starts = rng.uniform(1.0 - half, 1.0 + half, size=K)
    step = drift_step(T)
    return Environment([DriftingArm(m, step) for m in starts], seed)


def make_mixed(arm_specs: Sequence[ArmProcess], seed=None) -> Environment:
    return Environment(arm_specs, seed)
