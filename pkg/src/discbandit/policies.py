"""Arm-selection policies.

Index policies keep a per-arm cache of the weighted estimate and the weight
norm. In a rested bandit only the pulled arm's history changes, so each
round recomputes one arm's weights and evaluates the K indices vectorized.
Ties go to the lowest arm index (``np.argmax`` semantics).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ArmHistory, ConfigError, ContractViolation, WeightVector, weighted_mean
from .weights import (
    DEFAULT_WINDOW_EXPONENT,
    WeightAudit,
    WeightScheme,
    resolve_scheme,
    weights_for,
)

log = logging.getLogger(__name__)

POLICY_KINDS = ("weighted_ucb", "disc_ucb", "ucb1", "exp3")


def exploration(t: int) -> float:
    """``sqrt(2 log t)`` with natural log; zero at t = 1."""
    return math.sqrt(2.0 * math.log(t)) if t > 1 else 0.0


def round_robin_init(n_arms: int) -> list[int]:
    return list(range(n_arms))


def _estimates(histories: Sequence[ArmHistory], weights: Sequence[WeightVector]) -> tuple[np.ndarray, np.ndarray]:
    for h in histories:
        if h.pull_count == 0:
            raise ContractViolation(f"arm {h.arm_id} reached index selection without a pull")
    est = np.array([weighted_mean(h, q) for h, q in zip(histories, weights)])
    norms = np.array([q.norm2 for q in weights])
    return est, norms


def weighted_ucb_indices(estimates, norms, C: float, t: int) -> np.ndarray:
    return np.asarray(estimates) + (C + 1.0) * np.asarray(norms) * exploration(t)


def disc_ucb_indices(estimates, norms, discrepancies, t: int) -> np.ndarray:
    return np.asarray(estimates) + np.asarray(discrepancies) + np.asarray(norms) * exploration(t)


def weighted_ucb_select(histories: Sequence[ArmHistory], weights: Sequence[WeightVector], C: float, t: int) -> int:
    est, norms = _estimates(histories, weights)
    return int(np.argmax(weighted_ucb_indices(est, norms, C, t)))


def disc_ucb_select(
    histories: Sequence[ArmHistory],
    weights: Sequence[WeightVector],
    discrepancy: Callable[[int, WeightVector], float],
    t: int,
) -> int:
    est, norms = _estimates(histories, weights)
    d = np.array([discrepancy(i, q) for i, q in enumerate(weights)])
    return int(np.argmax(disc_ucb_indices(est, norms, d, t)))


def ucb1_select(histories: Sequence[ArmHistory], t: int) -> int:
    n = np.array([h.pull_count for h in histories], dtype=np.float64)
    if np.any(n == 0):
        raise ContractViolation("every arm needs a pull before UCB1 selection")
    means = np.array([h.rewards.sum() for h in histories]) / n
    bonus = np.sqrt(2.0 * math.log(t) / n) if t > 1 else np.zeros_like(n)
    return int(np.argmax(means + bonus))


class Policy:
    name = "policy"

    def __init__(self, n_arms: int):
        if n_arms < 1:
            raise ConfigError("policy needs at least one arm")
        self.n_arms = n_arms

    def select(self, t: int) -> int:
        raise NotImplementedError

    def update(self, arm: int, t: int, reward: float) -> None:
        raise NotImplementedError


class IndexPolicy(Policy):
    """Round-robin over unpulled arms, then the argmax of a weighted index."""

    def __init__(self, n_arms: int, schemes: Sequence[WeightScheme] | WeightScheme | None = None):
        super().__init__(n_arms)
        if schemes is None:
            schemes = WeightScheme()
        if isinstance(schemes, WeightScheme):
            schemes = [schemes] * n_arms
        if len(schemes) != n_arms:
            raise ConfigError(f"need {n_arms} weight schemes, got {len(schemes)}")
        self.schemes = list(schemes)
        self.histories = [ArmHistory(i) for i in range(n_arms)]
        self.weights: list[WeightVector | None] = [None] * n_arms
        self.audit = WeightAudit()
        self._est = np.zeros(n_arms)
        self._norm = np.zeros(n_arms)
        self._unpulled = n_arms

    def indices(self, t: int) -> np.ndarray:
        raise NotImplementedError

    def select(self, t: int) -> int:
        if self._unpulled:
            return next(i for i, h in enumerate(self.histories) if h.pull_count == 0)
        return int(np.argmax(self.indices(t)))

    def update(self, arm: int, t: int, reward: float) -> None:
        h = self.histories[arm]
        if h.pull_count == 0:
            self._unpulled -= 1
        h.record(t, reward)
        q = weights_for(self.schemes[arm], h, audit=self.audit)
        self.weights[arm] = q
        self._est[arm] = weighted_mean(h, q)
        self._norm[arm] = q.norm2
        self._refresh(arm, q)

    def _refresh(self, arm: int, q: WeightVector) -> None:
        pass


class WeightedUCB(IndexPolicy):
    name = "weighted_ucb"

    def __init__(self, n_arms: int, schemes=None, C: float = 0.0):
        super().__init__(n_arms, schemes)
        if C < 0:
            raise ConfigError(f"C must be >= 0, got {C}")
        self.C = float(C)

    def indices(self, t: int) -> np.ndarray:
        return weighted_ucb_indices(self._est, self._norm, self.C, t)


class DiscUCB(IndexPolicy):
    """UCB with the true weighted discrepancy supplied by an oracle ``(arm, q) -> D``."""

    name = "disc_ucb"

    def __init__(self, n_arms: int, discrepancy: Callable[[int, WeightVector], float], schemes=None):
        super().__init__(n_arms, schemes)
        self.discrepancy = discrepancy
        self._disc = np.zeros(n_arms)

    def _refresh(self, arm, q):
        self._disc[arm] = self.discrepancy(arm, q)

    def indices(self, t: int) -> np.ndarray:
        return disc_ucb_indices(self._est, self._norm, self._disc, t)


class UCB1(Policy):
    name = "ucb1"

    def __init__(self, n_arms: int):
        super().__init__(n_arms)
        self.counts = np.zeros(n_arms)
        self.sums = np.zeros(n_arms)

    def select(self, t: int) -> int:
        unpulled = np.flatnonzero(self.counts == 0)
        if unpulled.size:
            return int(unpulled[0])
        bonus = np.sqrt(2.0 * math.log(t) / self.counts) if t > 1 else 0.0
        return int(np.argmax(self.sums / self.counts + bonus))

    def update(self, arm, t, reward):
        self.counts[arm] += 1
        self.sums[arm] += reward


LOG_WEIGHT_FLOOR = -700.0


def default_eta(n_arms: int, horizon: int) -> float:
    """Learning rate for pure exponential weights (no uniform mixing)."""
    return math.sqrt(2.0 * math.log(max(n_arms, 2)) / (horizon * n_arms))


def horizon_gamma(n_arms: int, horizon: int) -> float:
    """Horizon-tuned exploration rate ``min(1, sqrt(K ln K / ((e - 1) T)))``."""
    K = max(n_arms, 2)
    return min(1.0, math.sqrt(K * math.log(K) / ((math.e - 1.0) * horizon)))


class EXP3(Policy):
    """Exponential weights on importance-weighted rewards rescaled to [0, 1].

    Weights are kept in the log domain; ``gamma`` mixes in uniform
    exploration. With neither ``eta`` nor ``gamma`` given, the classical
    horizon tuning is used (``gamma`` from the horizon, ``eta = gamma / K``). With
    only ``eta`` given, ``gamma`` is 0; with only ``gamma``, ``eta = gamma / K``.
    """

    name = "exp3"

    def __init__(
        self,
        n_arms: int,
        horizon: int | None = None,
        eta: float | None = None,
        reward_range: tuple[float, float] = (0.0, 1.0),
        gamma: float | None = None,
        rng: np.random.Generator | None = None,
    ):
        super().__init__(n_arms)
        if eta is None and gamma is None:
            if horizon is None:
                raise ConfigError("EXP3 needs eta, gamma or the horizon")
            gamma = horizon_gamma(n_arms, horizon)
        if eta is None:
            eta = gamma / n_arms
        if gamma is None:
            gamma = 0.0
        lo, hi = reward_range
        if not eta > 0:
            raise ConfigError(f"eta must be positive, got {eta}")
        if not lo < hi:
            raise ConfigError(f"invalid reward range {reward_range}")
        if not 0.0 <= gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
        self.eta = float(eta)
        self.reward_range = (float(lo), float(hi))
        self.gamma = float(gamma)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.log_weights = np.zeros(n_arms)
        self.clipped = 0

    def probabilities(self) -> np.ndarray:
        z = self.log_weights - self.log_weights.max()
        p = np.exp(z)
        p /= p.sum()
        if self.gamma:
            p = (1.0 - self.gamma) * p + self.gamma / self.n_arms
        return p

    def select(self, t: int) -> int:
        cdf = np.cumsum(self.probabilities())
        i = int(np.searchsorted(cdf, self.rng.random() * cdf[-1], side="right"))
        return min(i, self.n_arms - 1)

    def scaled(self, reward: float) -> float:
        lo, hi = self.reward_range
        x = (reward - lo) / (hi - lo)
        if x < 0.0 or x > 1.0:
            self.clipped += 1
            log.debug("EXP3 reward %r outside %r, clipped", reward, self.reward_range)
            x = min(max(x, 0.0), 1.0)
        return x

    def update(self, arm: int, t: int, reward: float) -> None:
        p = self.probabilities()[arm]
        self.log_weights[arm] += self.eta * self.scaled(reward) / p
        self.log_weights -= self.log_weights.max()
        # keep exp() away from underflow so every arm stays reachable
        np.maximum(self.log_weights, LOG_WEIGHT_FLOOR, out=self.log_weights)


def exp3_select(state: EXP3, t: int = 0) -> int:
    return state.select(t)


def exp3_update(state: EXP3, arm: int, reward: float, t: int = 0) -> EXP3:
    state.update(arm, t, reward)
    return state


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "weighted_ucb"
    C: float = 0.0
    scheme: str = "auto"
    window_exponent: float = DEFAULT_WINDOW_EXPONENT
    eta: float | None = None
    gamma: float | None = None
    reward_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.C < 0:
            raise ConfigError(f"C must be >= 0, got {self.C}")


def build_policy(spec: PolicySpec, env, horizon: int) -> Policy:
    K = env.n_arms
    if spec.kind == "ucb1":
        return UCB1(K)
    if spec.kind == "exp3":
        rr = spec.reward_range or env.reward_range
        return EXP3(K, horizon, spec.eta, rr, spec.gamma, env.policy_rng())
    schemes = [resolve_scheme(spec.scheme, arm, spec.window_exponent) for arm in env.arms]
    if spec.kind == "disc_ucb":
        return DiscUCB(K, env.discrepancy, schemes)
    return WeightedUCB(K, schemes, spec.C)
