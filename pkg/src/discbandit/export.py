"""CSV export of per-round trial rows and per-round aggregate summaries.

Floats use 9 significant digits and lines end in LF. Files are written to a
temporary sibling and renamed, so a failure never leaves a partial file.
"""

from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

from .engine import AggregateResult

ROUNDS_HEADER = ("trial", "t", "arm", "reward", "cum_reward", "avg_reward_per_round", "delta_reg")
SUMMARY_HEADER = ("t", "mean_avg_reward", "std_avg_reward", "mean_delta_reg")


def fmt(x: float) -> str:
    return format(float(x), ".9g")


def _atomic_write(path: Path, header, rows) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _round_rows(result: AggregateResult):
    for i, tr in enumerate(result.trials):
        avg = tr.avg_reward
        for k in range(tr.T):
            yield (
                i,
                k + 1,
                int(tr.arms[k]),
                fmt(tr.rewards[k]),
                fmt(tr.cum_reward[k]),
                fmt(avg[k]),
                fmt(tr.delta_reg[k]),
            )


def _summary_rows(result: AggregateResult):
    for k in range(result.mean_avg_reward.size):
        yield (
            k + 1,
            fmt(result.mean_avg_reward[k]),
            fmt(result.std_avg_reward[k]),
            fmt(result.mean_delta_reg[k]),
        )


def export_csv(result: AggregateResult, rounds_path, summary_path) -> None:
    _atomic_write(rounds_path, ROUNDS_HEADER, _round_rows(result))
    _atomic_write(summary_path, SUMMARY_HEADER, _summary_rows(result))


def export_named(result: AggregateResult, out_dir, stem: str) -> tuple[Path, Path]:
    """Write ``<stem>_rounds.csv`` and ``<stem>_summary.csv`` under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = out_dir / f"{stem}_rounds.csv", out_dir / f"{stem}_summary.csv"
    export_csv(result, *paths)
    return paths
