"""Weight schemes over an arm's past pulls, one per process family."""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .core import ArmHistory, ConfigError, EmptyHistoryError, NoSupportError, WeightVector

log = logging.getLogger(__name__)


class SchemeKind(str, Enum):
    UNIFORM = "uniform"
    SINCE_CHANGE = "since_change"
    STATE_MATCHED = "state_matched"
    PHASE_MATCHED = "phase_matched"
    TREND_MATCHED = "trend_matched"
    RECENT_WINDOW = "recent_window"


@dataclass(frozen=True)
class WeightScheme:
    kind: SchemeKind = SchemeKind.UNIFORM
    change_points: tuple[int, ...] = (1,)
    period: int = 1
    block_length: int = 1
    trend_table: tuple[float, ...] = ()
    window_exponent: float = 1.5
    # match the trend value of the next pull (True) or of the latest pull (False)
    next_pull: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if self.period < 1 or self.block_length < 1:
            raise ConfigError("period and block_length must be >= 1")
        if self.window_exponent <= 0:
            raise ConfigError("window exponent must be positive")
        if self.kind is SchemeKind.TREND_MATCHED and not self.trend_table:
            raise ConfigError("trend_matched scheme needs a trend table")
        cps = list(self.change_points)
        if not cps or cps[0] != 1 or any(b <= a for a, b in zip(cps, cps[1:])):
            raise ConfigError(f"change points must be increasing from 1: {cps}")


@dataclass
class WeightAudit:
    """Per-trial bookkeeping of fallbacks and of ``norm2**2 * pull_count``."""

    calls: int = 0
    fallbacks: int = 0
    max_concentration: float = 0.0

    def observe(self, q: WeightVector) -> None:
        self.calls += 1
        self.max_concentration = max(self.max_concentration, q.concentration)


def _require_pulls(history: ArmHistory) -> int:
    n = history.pull_count
    if n == 0:
        raise EmptyHistoryError(f"arm {history.arm_id} has no pulls")
    return n


def _masked(n: int, mask: np.ndarray, what: str) -> WeightVector:
    if not mask.any():
        raise NoSupportError(f"no past pull matches the {what} rule")
    return WeightVector.uniform_over(n, mask)


def uniform_weights(history: ArmHistory) -> WeightVector:
    return WeightVector.uniform_over(_require_pulls(history))


def since_change_weights(history: ArmHistory, change_points: Sequence[int]) -> WeightVector:
    """Uniform over pulls since the last change point <= pull_count."""
    n = _require_pulls(history)
    j = bisect.bisect_right(list(change_points), n) - 1
    start = change_points[j] if j >= 0 else 1
    mask = np.arange(1, n + 1) >= start
    return WeightVector.uniform_over(n, mask)


def state_matched_weights(
    history: ArmHistory, current_state: float | None = None, initial_value: float | None = None
) -> WeightVector:
    """Uniform over pulls whose preceding emitted value equals ``current_state``.

    ``current_state`` defaults to the latest reward. ``initial_value`` is the
    value preceding pull 1; when unknown, pull 1 never matches.
    """
    n = _require_pulls(history)
    r = history.rewards
    if current_state is None:
        current_state = r[-1]
    mask = np.zeros(n, dtype=bool)
    mask[1:] = r[:-1] == current_state
    if initial_value is not None:
        mask[0] = initial_value == current_state
    return _masked(n, mask, "state")


def phase_indices(pull_indices: np.ndarray, period: int, block_length: int = 1) -> np.ndarray:
    return ((pull_indices - 1) // block_length) % period


def phase_matched_weights(history: ArmHistory, period: int, block_length: int = 1) -> WeightVector:
    """Uniform over pulls in the same phase as the next pull.

    With ``block_length`` 1 this is congruence of pull indices mod ``period``.
    """
    n = _require_pulls(history)
    if period < 1 or block_length < 1:
        raise ConfigError("period and block_length must be >= 1")
    s = np.arange(1, n + 1)
    target = ((n + 1 - 1) // block_length) % period
    return _masked(n, phase_indices(s, period, block_length) == target, "phase")


def trend_matched_weights(history: ArmHistory, trend_table: Sequence[float], next_pull: bool = True) -> WeightVector:
    n = _require_pulls(history)
    table = np.asarray(trend_table, dtype=np.float64)
    if table.size == 0:
        raise ConfigError("trend table must be nonempty")
    s = np.arange(1, n + 1)
    target = table[(n + 1 if next_pull else n) % table.size]
    return _masked(n, table[s % table.size] == target, "trend")


def window_size(pull_count: int, window_exponent: float) -> int:
    raw = pull_count ** (2.0 * window_exponent / 3.0)
    # guard exact powers such as 27**(1/3) against rounding below the integer
    return min(pull_count, max(1, math.floor(raw + 1e-9)))


def recent_window_weights(history: ArmHistory, window_exponent: float) -> WeightVector:
    n = _require_pulls(history)
    if window_exponent <= 0:
        raise ConfigError("window exponent must be positive")
    w = window_size(n, window_exponent)
    mask = np.zeros(n, dtype=bool)
    mask[n - w :] = True
    return WeightVector.uniform_over(n, mask)


def weights_for(
    scheme: WeightScheme,
    history: ArmHistory,
    context: Mapping | None = None,
    audit: WeightAudit | None = None,
) -> WeightVector:
    """Dispatch to the scheme's constructor, falling back to uniform weights on no support."""
    context = context or {}
    kind = scheme.kind
    try:
        if kind is SchemeKind.UNIFORM:
            q = uniform_weights(history)
        elif kind is SchemeKind.SINCE_CHANGE:
            q = since_change_weights(history, scheme.change_points)
        elif kind is SchemeKind.STATE_MATCHED:
            q = state_matched_weights(history, context.get("current_state"), context.get("initial_value"))
        elif kind is SchemeKind.PHASE_MATCHED:
            q = phase_matched_weights(history, scheme.period, scheme.block_length)
        elif kind is SchemeKind.TREND_MATCHED:
            q = trend_matched_weights(history, scheme.trend_table, scheme.next_pull)
        else:
            q = recent_window_weights(history, scheme.window_exponent)
    except NoSupportError:
        log.debug("arm %d: %s has no support, using uniform weights", history.arm_id, kind.value)
        if audit is not None:
            audit.fallbacks += 1
        q = uniform_weights(history)
    if audit is not None:
        audit.observe(q)
    return q


DEFAULT_WINDOW_EXPONENT = 2.0 / 3.0


def scheme_for_arm(arm, window_exponent: float = DEFAULT_WINDOW_EXPONENT) -> WeightScheme:
    """The family-matched scheme for an arm process (duck-typed on ``arm.family``)."""
    family = arm.family
    if family in ("iid", "complete_dependence", "rotting"):
        return WeightScheme(SchemeKind.UNIFORM)
    if family in ("rarely_changing", "rotting_jumps"):
        return WeightScheme(SchemeKind.SINCE_CHANGE, change_points=tuple(arm.change_points))
    if family == "markov":
        return WeightScheme(SchemeKind.STATE_MATCHED)
    if family == "periodic":
        return WeightScheme(SchemeKind.PHASE_MATCHED, period=arm.n_periods, block_length=arm.period_length)
    if family == "known_trend":
        return WeightScheme(SchemeKind.TREND_MATCHED, trend_table=tuple(arm.trend_table))
    if family == "drifting":
        return WeightScheme(SchemeKind.RECENT_WINDOW, window_exponent=window_exponent)
    raise ConfigError(f"no matched weight scheme for family {family!r}")


def resolve_scheme(name: str, arm, window_exponent: float = DEFAULT_WINDOW_EXPONENT) -> WeightScheme:
    """Turn a config scheme name into a concrete scheme for one arm."""
    if name == "auto":
        return scheme_for_arm(arm, window_exponent)
    try:
        kind = SchemeKind(name)
    except ValueError:
        raise ConfigError(f"unknown weight scheme {name!r}") from None
    if kind is SchemeKind.UNIFORM:
        return WeightScheme(kind)
    if kind is SchemeKind.RECENT_WINDOW:
        return WeightScheme(kind, window_exponent=window_exponent)
    matched = scheme_for_arm(arm, window_exponent)
    if matched.kind is not kind:
        raise ConfigError(f"scheme {name!r} needs metadata that a {arm.family} arm does not carry")
    return matched
