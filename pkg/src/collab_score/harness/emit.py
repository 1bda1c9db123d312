"""Result tables: rejection rates, p-values for QQ plots, power curves."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd

from collab_score.errors import InvalidArg, IoError
from collab_score.harness.monte_carlo import McResult, PowerPoint

OutputFormat = Literal["csv", "json"]

REJECTION_COLUMNS = ["scenario", "h", "alpha", "cst_rate", "ocst_rate", "reps"]
QQ_COLUMNS = ["scenario", "uniform_quantile", "p_value"]
POWER_COLUMNS = ["scenario", "h", "alpha", "empirical", "oracle", "theoretical"]


def column_label(result: McResult) -> str:
    return f"{result.scenario}@h={result.h:g}"


def rejection_table(results: Sequence[McResult]) -> pd.DataFrame:
    rows = []
    for result in results:
        for alpha in result.alphas:
            oracle = None if result.oracle_rejection_rate is None else result.oracle_rejection_rate[alpha]
            rows.append(
                {
                    "scenario": result.scenario,
                    "h": result.h,
                    "alpha": alpha,
                    "cst_rate": result.rejection_rate[alpha],
                    "ocst_rate": oracle,
                    "reps": result.replications,
                }
            )
    return pd.DataFrame(rows, columns=REJECTION_COLUMNS)


def p_value_table(results: Sequence[McResult]) -> pd.DataFrame:
    """One column per scenario; shorter columns are padded with NaN."""
    columns = {column_label(result): pd.Series(result.p_values, dtype=float) for result in results}
    return pd.DataFrame(columns)


def qq_table(results: Sequence[McResult]) -> pd.DataFrame:
    """Sorted p-values against uniform plotting positions (i - 0.5) / R."""
    frames = []
    for result in results:
        ordered = np.sort(result.p_values)
        total = ordered.shape[0]
        frames.append(
            pd.DataFrame(
                {
                    "scenario": column_label(result),
                    "uniform_quantile": (np.arange(1, total + 1) - 0.5) / max(total, 1),
                    "p_value": ordered,
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=QQ_COLUMNS)
    return pd.concat(frames, ignore_index=True)[QQ_COLUMNS]


def power_table(scenario: str, alpha: float, points: Sequence[PowerPoint]) -> pd.DataFrame:
    rows = [
        {
            "scenario": scenario,
            "h": point.h,
            "alpha": alpha,
            "empirical": point.empirical,
            "oracle": point.oracle,
            "theoretical": point.theoretical,
        }
        for point in points
    ]
    return pd.DataFrame(rows, columns=POWER_COLUMNS)


def write_table(frame: pd.DataFrame, path: Path, fmt: OutputFormat = "csv") -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            frame.to_csv(path, index=False)
        else:
            frame.to_json(path, orient="records", indent=2)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def emit(
    results: Sequence[McResult],
    out_dir: str | Path,
    fmt: OutputFormat = "csv",
    qq: bool = True,
) -> dict[str, Path]:
    """Write rejection rates, per-scenario p-values and (optionally) QQ data."""
    if fmt not in ("csv", "json"):
        raise InvalidArg(f"unsupported output format {fmt!r}")
    target = Path(out_dir)
    written = {
        "rejection": write_table(rejection_table(results), target / f"rejection.{fmt}", fmt),
        "p_values": write_table(p_value_table(results), target / f"p_values.{fmt}", fmt),
    }
    if qq:
        written["qq"] = write_table(qq_table(results), target / f"qq.{fmt}", fmt)
    return written
