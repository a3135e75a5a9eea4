"""CSV serialization of analytic and empirical result rows."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

from . import __version__

__all__ = ["ReportRow", "REPORT_COLUMNS", "analytic_row", "empirical_row", "format_value", "write_csv"]


@dataclass(frozen=True)
class ReportRow:
    label: str
    policy: str
    source: str                       # "analytic" or "monte_carlo"
    p_th: float = math.nan
    n_slots: float = math.nan
    g_th: float = math.nan
    alpha_th: float = math.nan
    rx_scale: float = math.nan
    beta: float = math.nan
    mse_total: float = math.nan
    mse1: float = math.nan
    mse2: float = math.nan
    noise: float = math.nan
    avg_power: float = math.nan
    expected_misaligned: float = math.nan
    stderr_mse: float = math.nan
    stderr_power: float = math.nan
    stderr_misaligned: float = math.nan
    n_runs: float = math.nan
    seed: float = math.nan


REPORT_COLUMNS = tuple(f.name for f in fields(ReportRow))


def analytic_row(label, policy, p_th, params, mse, power, misaligned):
    return ReportRow(
        label=label, policy=policy, source="analytic", p_th=p_th,
        n_slots=params.n_slots, g_th=params.g_th, alpha_th=params.alpha_th,
        rx_scale=params.rx_scale, beta=params.beta,
        mse_total=mse.total, mse1=mse.mse1, mse2=mse.mse2, noise=mse.noise,
        avg_power=power, expected_misaligned=misaligned,
    )


def empirical_row(label, policy, p_th, params, metrics, seed):
    aircomp = policy == "aircomp"
    return ReportRow(
        label=label, policy=policy, source="monte_carlo", p_th=p_th,
        n_slots=1 if aircomp else params.n_slots,
        g_th=math.nan if aircomp else params.g_th,
        alpha_th=metrics.mean_alpha_th, rx_scale=metrics.mean_rx_scale,
        beta=math.nan if aircomp else params.beta,
        mse_total=metrics.mse.total, mse1=metrics.mse.mse1, mse2=metrics.mse.mse2,
        noise=metrics.mse.noise, avg_power=metrics.avg_power,
        expected_misaligned=metrics.mean_misaligned,
        stderr_mse=metrics.stderr_mse, stderr_power=metrics.stderr_power,
        stderr_misaligned=metrics.stderr_misaligned, n_runs=metrics.n_runs, seed=seed,
    )


def format_value(v) -> str:
    """Locale-independent, round-trippable text; NaN becomes an empty field."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if v.is_integer() and abs(v) < 2**53:
            return str(int(v))
        return repr(v)
    return str(v)


def write_csv(
    rows: Iterable,
    out,
    columns: Sequence[str] | None = None,
    meta: dict | None = None,
) -> None:
    """Write ``rows`` (dataclasses or dicts) with ``#`` metadata lines first."""
    rows = list(rows)
    if columns is None:
        columns = REPORT_COLUMNS
    lines = io.StringIO()
    header = {"generator": f"msaircomp {__version__}"}
    header.update(meta or {})
    for key, val in header.items():
        lines.write(f"# {key}: {format_value(val)}\n")
    writer = csv.writer(lines, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        d = asdict(row) if not isinstance(row, dict) else row
        writer.writerow([format_value(d.get(c, math.nan)) for c in columns])
    out.write(lines.getvalue())
