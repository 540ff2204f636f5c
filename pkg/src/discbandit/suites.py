"""Experiment panels and verification suites shared by the CLI and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ArmHistory, NoSupportError
from .engine import AggregateResult, EnvSpec, concentration_rates, log_growth, run_trials
from .environments import IIDArm, MarkovArm, PeriodicArm, RarelyChangingArm, TrendArm
from .export import export_named
from .policies import PolicySpec
from .weights import (
    WeightScheme,
    phase_matched_weights,
    since_change_weights,
    state_matched_weights,
    trend_matched_weights,
    uniform_weights,
)

PANEL_K = 150
PANEL_T = 5000
PANEL_TRIALS = 10

PANELS: dict[str, EnvSpec] = {
    "iid": EnvSpec("iid", PANEL_K),
    "rarely_changing": EnvSpec("rarely_changing", PANEL_K),
    "rotting": EnvSpec("rotting", PANEL_K),
    "drifting": EnvSpec("drifting", PANEL_K),
    "known_trend": EnvSpec("known_trend", PANEL_K),
    "periodic": EnvSpec("periodic", PANEL_K, {"period_length": 50}),
}
# panels where the learner must lead by a pooled standard deviation, not just on the mean
STRICT_PANELS = ("iid", "drifting", "rarely_changing")

PANEL_POLICIES: dict[str, PolicySpec] = {
    "weighted_ucb": PolicySpec("weighted_ucb"),
    "exp3": PolicySpec("exp3"),
}


@dataclass
class Report:
    name: str
    passed: bool = True
    lines: list[str] = field(default_factory=list)

    def check(self, ok: bool, line: str) -> None:
        self.passed &= bool(ok)
        self.lines.append(f"{'PASS' if ok else 'FAIL'}  {line}")


def run_panel(
    name: str,
    out_dir=None,
    T: int = PANEL_T,
    trials: int = PANEL_TRIALS,
    seed: int = 0,
    workers: int = 1,
    K: int | None = None,
) -> dict[str, AggregateResult]:
    """Run both panel policies; with ``out_dir``, write ``<policy>/<name>_{rounds,summary}.csv``."""
    spec = PANELS[name]
    if K is not None:
        spec = EnvSpec(spec.family, K, spec.params)
    results = {}
    for pname, pspec in PANEL_POLICIES.items():
        results[pname] = run_trials(spec, pspec, T, trials, seed, workers)
        if out_dir is not None:
            export_named(results[pname], Path(out_dir) / pname, name)
    return results


def panel_margin(name: str, results: dict[str, AggregateResult]) -> tuple[bool, str]:
    """Compare final-round average rewards of WeightedUCB against EXP3."""
    a, b = results["weighted_ucb"], results["exp3"]
    ma, mb = a.mean_avg_reward[-1], b.mean_avg_reward[-1]
    pooled = math.sqrt((a.std_avg_reward[-1] ** 2 + b.std_avg_reward[-1] ** 2) / 2.0)
    need = pooled if name in STRICT_PANELS else 0.0
    ok = ma - mb >= need
    rule = ">= 1 pooled sd" if name in STRICT_PANELS else ">= 0"
    return ok, f"{name}: weighted_ucb {ma:.4f} vs exp3 {mb:.4f}, diff {ma - mb:+.4f}, need {rule} ({need:.4f})"


def regret_ordering_holds(result: AggregateResult) -> bool:
    return all(bool(np.all(np.diff(r.delta_reg) >= 0) and r.delta_reg[-1] >= r.reg[-1]) for r in result.trials)


def verify_concentration(
    t: int = 100, deltas=(0.5, 0.05, 0.01), replicates: int = 100_000, seed: int = 0
) -> Report:
    rep = Report("concentration")
    rates = concentration_rates(IIDArm(0.5), WeightScheme(), t, deltas, replicates, seed)
    for r in rates:
        rep.check(
            r.upper_rate <= r.delta and r.lower_rate <= r.delta,
            f"delta={r.delta:g}: upper {r.upper_rate:.5f}, lower {r.lower_rate:.5f} over {r.replicates} replicates",
        )
    return rep


def _random_history(arm, rng, max_pulls, weights, valid=lambda n: True):
    """Pull ``arm`` a random number of times until the matched weights have support."""
    while True:
        n = int(rng.integers(1, max_pulls + 1))
        if not valid(n):
            continue
        arm.reset()
        h = ArmHistory.from_arrays(arm.simulate(n, rng))
        try:
            return weights(h)
        except NoSupportError:
            continue


def zero_discrepancy_pairings(histories: int = 100, max_pulls: int = 1000, seed: int = 0) -> dict[str, float]:
    """Largest |D| over randomized histories for each zero-discrepancy pairing."""
    rng = np.random.default_rng(seed)
    worst = {k: 0.0 for k in ("iid", "markov", "rarely_changing", "periodic", "known_trend")}
    for _ in range(histories):
        arm = IIDArm(float(rng.uniform()))
        q = _random_history(arm, rng, max_pulls, uniform_weights)
        worst["iid"] = max(worst["iid"], abs(arm.discrepancy(q)))

        n_states = int(rng.integers(2, 5))
        arm = MarkovArm(rng.dirichlet(np.full(n_states, 2.0), size=n_states), rng.permutation(n_states) / n_states)
        q = _random_history(arm, rng, max_pulls, state_matched_weights)
        worst["markov"] = max(worst["markov"], abs(arm.discrepancy(q)))

        n_seg = int(rng.integers(1, 11))
        cps = [1] + sorted(rng.choice(np.arange(2, max_pulls + 1), size=n_seg - 1, replace=False).tolist())
        arm = RarelyChangingArm(rng.uniform(size=n_seg).tolist(), cps)
        q = _random_history(
            arm, rng, max_pulls, lambda h: since_change_weights(h, cps), valid=lambda n: n + 1 not in cps
        )
        worst["rarely_changing"] = max(worst["rarely_changing"], abs(arm.discrepancy(q)))

        p, L = int(rng.integers(1, 6)), int(rng.integers(1, 61))
        arm = PeriodicArm(rng.uniform(1, 20, size=p).tolist(), period_length=L)
        q = _random_history(arm, rng, max_pulls, lambda h: phase_matched_weights(h, p, L))
        worst["periodic"] = max(worst["periodic"], abs(arm.discrepancy(q)))

        table = tuple(rng.uniform(0.1, 3.0, size=int(rng.integers(1, 6))).tolist())
        arm = TrendArm(float(rng.uniform(0.1, 6.0)), table)
        q = _random_history(arm, rng, max_pulls, lambda h: trend_matched_weights(h, table))
        worst["known_trend"] = max(worst["known_trend"], abs(arm.discrepancy(q)))
    return worst


def verify_discrepancy_zero(histories: int = 100, max_pulls: int = 1000, seed: int = 0, tol: float = 1e-12) -> Report:
    rep = Report("discrepancy-zero")
    for name, worst in zero_discrepancy_pairings(histories, max_pulls, seed).items():
        rep.check(worst <= tol, f"{name}: max |D| = {worst:.3e} over {histories} histories (tol {tol:g})")
    return rep


LOG_GROWTH_FAMILIES: dict[str, EnvSpec] = {
    "iid": EnvSpec("iid", 10),
    "rotting": EnvSpec("rotting", 10),
    "periodic": EnvSpec("periodic", 10, {"period_length": 50}),
    "rarely_changing": EnvSpec("rarely_changing", 10),
    "known_trend": EnvSpec("known_trend", 10),
    "markov": EnvSpec("markov", 10),
}
LOG_GROWTH_THRESHOLD = 1.6


def verify_log_growth(trials: int = 50, seed: int = 0, workers: int = 1, horizons=(1000, 2000, 4000)) -> Report:
    rep = Report("log-growth")
    growth = {}
    for name, spec in LOG_GROWTH_FAMILIES.items():
        g = log_growth(spec, PolicySpec("weighted_ucb"), horizons, trials, seed, workers)
        growth[name] = g
        for T in horizons[:-1]:
            ratio = g[2 * T] / g[T] if g[T] > 0 else float("inf")
            rep.check(
                ratio <= LOG_GROWTH_THRESHOLD,
                f"{name}: dreg({2 * T})/dreg({T}) = {ratio:.3f} (threshold {LOG_GROWTH_THRESHOLD})",
            )
    lo, hi = horizons[0], horizons[-1]
    exp3 = log_growth(LOG_GROWTH_FAMILIES["iid"], PolicySpec("exp3"), (lo, hi), trials, seed, workers)
    r_exp3 = exp3[hi] / exp3[lo]
    r_ucb = growth["iid"][hi] / growth["iid"][lo]
    rep.check(r_exp3 > r_ucb, f"iid: exp3 dreg({hi})/dreg({lo}) = {r_exp3:.3f} vs weighted_ucb {r_ucb:.3f}")
    return rep
