"""Shared domain types: arm histories, weight vectors and the regret ledger."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class BanditError(Exception):
    """Base class for library errors."""


class ContractViolation(BanditError, ValueError):
    pass


class EmptyHistoryError(BanditError, ValueError):
    pass


class NoSupportError(BanditError, ValueError):
    """A weight scheme found no past pull matching its selection rule."""


class NumericError(BanditError, ArithmeticError):
    pass


class ConfigError(BanditError, ValueError):
    pass


class ArmHistory:
    """Pulls of one arm as seen by the learner.

    The s-th recorded reward is the arm's s-th process value. Storage is a
    growable numpy buffer so weight schemes can read contiguous views.
    """

    def __init__(self, arm_id: int, capacity: int = 16):
        self.arm_id = arm_id
        self._rounds = np.zeros(max(capacity, 1), dtype=np.int64)
        self._rewards = np.zeros(max(capacity, 1), dtype=np.float64)
        self._n = 0

    @classmethod
    def from_rewards(cls, rewards: Sequence[float], arm_id: int = 0, rounds: Sequence[int] | None = None) -> ArmHistory:
        h = cls(arm_id, capacity=len(rewards))
        if rounds is None:
            rounds = range(1, len(rewards) + 1)
        for t, r in zip(rounds, rewards):
            h.record(t, r)
        return h

    @classmethod
    def from_arrays(cls, rewards: np.ndarray, arm_id: int = 0) -> ArmHistory:
        """History whose s-th pull happened in round s."""
        h = cls(arm_id, capacity=len(rewards))
        n = len(rewards)
        h._rewards[:n] = rewards
        h._rounds[:n] = np.arange(1, n + 1)
        h._n = n
        return h

    def record(self, global_round: int, reward: float) -> None:
        if self._n and global_round <= self._rounds[self._n - 1]:
            raise ContractViolation(
                f"arm {self.arm_id}: round {global_round} does not follow {self._rounds[self._n - 1]}"
            )
        if self._n == len(self._rewards):
            self._rounds = np.concatenate([self._rounds, np.zeros_like(self._rounds)])
            self._rewards = np.concatenate([self._rewards, np.zeros_like(self._rewards)])
        self._rounds[self._n] = global_round
        self._rewards[self._n] = reward
        self._n += 1

    @property
    def pull_count(self) -> int:
        return self._n

    @property
    def rewards(self) -> np.ndarray:
        return self._rewards[: self._n]

    @property
    def rounds(self) -> np.ndarray:
        return self._rounds[: self._n]

    @property
    def pulls(self) -> list[tuple[int, float]]:
        return list(zip(self.rounds.tolist(), self.rewards.tolist()))

    def __len__(self) -> int:
        return self._n

    def __repr__(self) -> str:
        return f"ArmHistory(arm_id={self.arm_id}, pull_count={self._n})"


@dataclass(frozen=True)
class WeightVector:
    """A probability distribution over an arm's past pulls."""

    weights: np.ndarray
    norm2: float

    @classmethod
    def from_weights(cls, weights) -> WeightVector:
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ContractViolation("weights must be a non-empty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise NumericError("weights must be finite and nonnegative")
        total = math.fsum(w)
        if abs(total - 1.0) > 1e-12:
            raise ContractViolation(f"weights sum to {total!r}, not 1")
        return cls(w, math.sqrt(math.fsum(w * w)))

    @classmethod
    def uniform_over(cls, n: int, mask: np.ndarray | None = None) -> WeightVector:
        """Uniform mass on ``mask`` (all of ``range(n)`` when omitted)."""
        if mask is None:
            return cls(np.full(n, 1.0 / n), 1.0 / math.sqrt(n))
        k = int(np.count_nonzero(mask))
        w = np.zeros(n)
        w[mask] = 1.0 / k
        return cls(w, 1.0 / math.sqrt(k))

    def __len__(self) -> int:
        return self.weights.size

    @property
    def concentration(self) -> float:
        """``norm2**2 * len``: the quantity the log-regret guarantees bound."""
        return self.norm2 * self.norm2 * self.weights.size


def weighted_mean(history: ArmHistory, q: WeightVector) -> float:
    n = history.pull_count
    if n == 0:
        raise EmptyHistoryError(f"arm {history.arm_id} has no pulls")
    if len(q) != n:
        raise ContractViolation(f"weight length {len(q)} != pull count {n}")
    r = history.rewards
    # fsum is order-independent, so arms with equal reward multisets tie exactly.
    value = math.fsum(q.weights * r)
    return min(max(value, float(r.min())), float(r.max()))


def gap(next_means: Sequence[float], arm: int) -> float:
    """Conditional-mean gap between the round's best arm and ``arm``."""
    m = np.asarray(next_means, dtype=np.float64)
    return float(m.max() - m[arm])


class RegretLedger:
    """Running path-dependent regret accounting.

    ``delta_reg`` accumulates the per-round gap to the best conditional mean.
    ``reg`` compares against the best single arm in hindsight; it is tracked
    as per-arm running sums of ``m_i(t) - m_{I_t}(t)`` added in the same order
    as the gap increments, so ``reg <= delta_reg`` holds exactly in floating
    point (each per-round term is dominated termwise).
    """

    def __init__(self, n_arms: int):
        if n_arms < 1:
            raise ConfigError("ledger needs at least one arm")
        self.n_arms = n_arms
        self.round = 0
        self.delta_reg = 0.0
        self.cum_reward = 0.0
        self.chosen_means: list[float] = []
        self.chosen_arms: list[int] = []
        self._trace: list[np.ndarray] = []
        self._excess = np.zeros(n_arms)

    def update(self, next_means, chosen: int, realized_reward: float) -> RegretLedger:
        m = np.array(next_means, dtype=np.float64)
        if m.shape != (self.n_arms,):
            raise ContractViolation(f"expected {self.n_arms} means, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NumericError(f"non-finite conditional mean in round {self.round + 1}")
        if not 0 <= chosen < self.n_arms:
            raise ContractViolation(f"arm {chosen} out of range")
        c = m[chosen]
        self.delta_reg += m.max() - c
        self._excess += m - c
        self._trace.append(m)
        self.chosen_means.append(float(c))
        self.chosen_arms.append(int(chosen))
        self.cum_reward += realized_reward
        self.round += 1
        return self

    @property
    def mean_trace(self) -> np.ndarray:
        """Array of shape (round, K): conditional next-pull means per round."""
        if not self._trace:
            return np.zeros((0, self.n_arms))
        return np.vstack(self._trace)

    @property
    def reg(self) -> float:
        if self.round == 0:
            raise EmptyHistoryError("ledger has no rounds")
        return float(self._excess.max())


def delta_reg_update(ledger: RegretLedger, next_means, chosen: int, realized_reward: float) -> RegretLedger:
    return ledger.update(next_means, chosen, realized_reward)


def path_dependent_reg(ledger: RegretLedger) -> float:
    return ledger.reg
