"""Line-oriented experiment configs.

Top-level ``key = value`` lines describe the run; ``[family]`` sections hold
family parameters. ``#`` starts a comment. Example::

    family = periodic
    K = 150
    T = 5000
    trials = 10
    policy = weighted_ucb
    seed = 7

    [periodic]
    period_length = 50
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .core import ConfigError
from .engine import FAMILIES, EnvSpec, build_environment
from .environments import trial_seed
from .policies import POLICY_KINDS, PolicySpec
from .weights import DEFAULT_WINDOW_EXPONENT, SchemeKind, WeightScheme, resolve_scheme


class ConfigParseError(ConfigError):
    """Every problem found in a config, each tagged with its line number."""

    def __init__(self, issues: list[tuple[int, str]]):
        self.issues = issues
        super().__init__("\n".join(f"line {n}: {msg}" if n else msg for n, msg in issues))


def _int(s: str) -> int:
    return int(s)


def _float(s: str) -> float:
    return float(s)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _components(s: str) -> tuple[tuple[str, int], ...]:
    out = []
    for part in s.split(","):
        family, _, n = part.strip().partition(":")
        if family.strip() not in FAMILIES or family.strip() == "mixed":
            raise ValueError(f"unknown component family {family.strip()!r}")
        out.append((family.strip(), int(n)))
    return tuple(out)


def _range(s: str) -> tuple[float, float]:
    lo, hi = _floats(s)
    return lo, hi


def _optional_float(s: str) -> float | None:
    return None if s.lower() == "none" else float(s)


TOP_KEYS: dict[str, Callable[[str], object]] = {
    "family": str,
    "K": _int,
    "T": _int,
    "trials": _int,
    "seed": _int,
    "policy": str,
    "scheme": str,
    "C": _float,
    "eta": _optional_float,
    "gamma": _optional_float,
    "reward_range": _range,
    "window_exponent": _float,
    "output": str,
}

SECTION_KEYS: dict[str, dict[str, Callable[[str], object]]] = {
    "iid": {"means": _floats},
    "complete_dependence": {},
    "rarely_changing": {"max_segments": _int, "noise_sd": _float},
    "rotting": {"baseline": _float},
    "rotting_jumps": {"max_segments": _int, "noise_sd": _float},
    "markov": {"n_states": _int},
    "periodic": {"period_length": _int, "noise_sd": _float},
    "known_trend": {"trend": _floats, "noise_sd": _float},
    "drifting": {},
    "mixed": {"components": _components},
}

REQUIRED_TOP = ("family", "K", "T", "trials", "policy", "seed")
REQUIRED_SECTION = {"periodic": ("period_length",), "mixed": ("components",)}


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvSpec
    policy: PolicySpec
    T: int
    trials: int
    seed: int
    output: str | None = None

    def schemes(self) -> list[WeightScheme | None]:
        """Concrete per-arm weight schemes (``None`` for policies without weights)."""
        if self.policy.kind in ("exp3", "ucb1"):
            return [None] * self.env.K
        env = build_environment(self.env, self.T, trial_seed(self.seed, 0))
        return [resolve_scheme(self.policy.scheme, a, self.policy.window_exponent) for a in env.arms]


def parse_config(text: str) -> ExperimentConfig:
    issues: list[tuple[int, str]] = []
    top: dict[str, tuple[int, object]] = {}
    sections: dict[str, dict[str, tuple[int, object]]] = {}
    current: str | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in SECTION_KEYS:
                issues.append((lineno, f"unknown section [{current}]"))
            elif current in sections:
                issues.append((lineno, f"duplicate section [{current}]"))
            sections.setdefault(current, {})
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            issues.append((lineno, f"expected key = value, got {raw.strip()!r}"))
            continue
        schema = TOP_KEYS if current is None else SECTION_KEYS.get(current)
        if schema is None:
            continue
        where = "top level" if current is None else f"[{current}]"
        if key not in schema:
            issues.append((lineno, f"unknown key {key!r} at {where}"))
            continue
        target = top if current is None else sections[current]
        if key in target:
            issues.append((lineno, f"duplicate key {key!r}"))
            continue
        try:
            target[key] = (lineno, schema[key](value))
        except (ValueError, TypeError) as exc:
            issues.append((lineno, f"bad value for {key!r}: {value!r} ({exc})"))

    for key in REQUIRED_TOP:
        if key not in top:
            issues.append((0, f"missing required key {key!r}"))
    if issues:
        raise ConfigParseError(issues)
    return _validate(top, sections)


def _validate(top, sections) -> ExperimentConfig:
    issues: list[tuple[int, str]] = []
    val = {k: v for k, (_, v) in top.items()}
    line = {k: n for k, (n, _) in top.items()}

    family, K, T, trials = val["family"], val["K"], val["T"], val["trials"]
    if family not in FAMILIES:
        issues.append((line["family"], f"unknown family {family!r}; expected one of {FAMILIES}"))
    if K < 1:
        issues.append((line["K"], f"K must be >= 1, got K={K}"))
    if T < K:
        issues.append((line["T"], f"T={T} must be at least K={K}"))
    if trials < 1:
        issues.append((line["trials"], f"trials must be >= 1, got {trials}"))
    if val["policy"] not in POLICY_KINDS:
        issues.append((line["policy"], f"unknown policy {val['policy']!r}; expected one of {POLICY_KINDS}"))
    scheme = val.get("scheme", "auto")
    if scheme != "auto" and scheme not in {k.value for k in SchemeKind}:
        issues.append((line["scheme"], f"unknown scheme {scheme!r}"))
    if val.get("C", 0.0) < 0:
        issues.append((line["C"], f"C must be >= 0, got {val['C']}"))
    if "reward_range" in val and not val["reward_range"][0] < val["reward_range"][1]:
        issues.append((line["reward_range"], f"reward_range needs lo < hi, got {val['reward_range']}"))
    if val.get("window_exponent", 1.0) <= 0:
        issues.append((line["window_exponent"], "window_exponent must be positive"))
    if issues:
        raise ConfigParseError(issues)

    used = [family]
    if family == "mixed":
        if "mixed" not in sections or "components" not in sections["mixed"]:
            raise ConfigParseError([(0, "family=mixed needs components in a [mixed] section")])
        n_line, comps = sections["mixed"]["components"]
        if sum(n for _, n in comps) != K:
            raise ConfigParseError([(n_line, f"components add up to {sum(n for _, n in comps)} arms, K={K}")])
        used += [f for f, _ in comps]

    params: dict[str, object] = {}
    for fam in used:
        for key in REQUIRED_SECTION.get(fam, ()):
            if key not in sections.get(fam, {}):
                issues.append((0, f"family {fam} needs {key!r} in a [{fam}] section"))
        for key, (n, v) in sections.get(fam, {}).items():
            if key in params and params[key] != v:
                issues.append((n, f"conflicting values for {key!r} across sections"))
            params[key] = v
    if issues:
        raise ConfigParseError(issues)

    try:
        policy = PolicySpec(
            kind=val["policy"],
            C=val.get("C", 0.0),
            scheme=scheme,
            window_exponent=val.get("window_exponent", DEFAULT_WINDOW_EXPONENT),
            eta=val.get("eta"),
            gamma=val.get("gamma"),
            reward_range=val.get("reward_range"),
        )
        env = EnvSpec(family, K, params)
    except ConfigError as exc:
        raise ConfigParseError([(0, str(exc))]) from None
    return ExperimentConfig(env, policy, T, trials, val["seed"], val.get("output"))


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())
