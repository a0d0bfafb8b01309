"""Measured-series ingest: per-phase power CSVs to imbalance reports.

Input is a CSV of per-phase active power (kW) with optional per-phase
reactive power (kVAr) and an optional measured neutral current column.
The report quantifies imbalance per row (max-min phase spread, a
neutral-current proxy) and aggregates the spread by clock hour.

The neutral proxy assumes nominal balanced voltages when converting
per-phase powers to current phasors; it approximates, not reproduces, a
measured neutral current.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

from .errors import NonMonotonicTimestamps, SchemaMismatch
from .powerflow import source_phasors

_BASE_COLUMNS = ("timestamp", "p_a_kw", "p_b_kw", "p_c_kw")
_Q_COLUMNS = ("q_a_kvar", "q_b_kvar", "q_c_kvar")
_NEUTRAL_COLUMN = "i_n_a"

#: Accepted header layouts, in column order.
ACCEPTED_HEADERS = tuple(
    _BASE_COLUMNS + q + n
    for q in ((), _Q_COLUMNS)
    for n in ((), (_NEUTRAL_COLUMN,))
)


@dataclass(frozen=True)
class MeasuredSeries:
    """Validated measured time series; ``q_kvar`` / ``i_n_a`` are None when
    the corresponding columns were absent."""

    timestamps: tuple[str, ...]
    hours: tuple[float, ...]  # hour-of-day per row, for hourly aggregation
    p_kw: tuple[tuple[float, float, float], ...]
    q_kvar: tuple[tuple[float, float, float], ...] | None
    i_n_a: tuple[float, ...] | None


@dataclass(frozen=True)
class ImbalanceReport:
    rows: list[dict[str, object]]
    hourly: list[dict[str, float]]


def _parse_timestamp(raw: str, row: int) -> tuple[float, float]:
    """Return (sort key, hour of day). Accepts plain hours or ISO 8601."""
    try:
        hours = float(raw)
        return hours, hours % 24.0
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(raw)
    except ValueError:
        raise SchemaMismatch(f"row {row}: cannot parse timestamp {raw!r}") from None
    return stamp.timestamp(), stamp.hour + stamp.minute / 60.0 + stamp.second / 3600.0


def read_measured_series(path: str) -> MeasuredSeries:
    """Parse and validate a measured-series CSV.

    Raises SchemaMismatch for an unexpected header or malformed cells and
    NonMonotonicTimestamps when timestamps do not strictly increase.
    """
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise SchemaMismatch("empty file") from None
        if header not in ACCEPTED_HEADERS:
            raise SchemaMismatch(
                f"unexpected columns {list(header)}; expected one of "
                + " | ".join(",".join(h) for h in ACCEPTED_HEADERS)
            )
        has_q = _Q_COLUMNS[0] in header
        has_n = _NEUTRAL_COLUMN in header

        timestamps: list[str] = []
        hours: list[float] = []
        p_rows: list[tuple[float, float, float]] = []
        q_rows: list[tuple[float, float, float]] = []
        n_rows: list[float] = []
        prev_key = -math.inf
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise SchemaMismatch(f"row {i}: expected {len(header)} cells, got {len(row)}")
            key, hour = _parse_timestamp(row[0], i)
            if key <= prev_key:
                raise NonMonotonicTimestamps(i)
            prev_key = key
            try:
                values = [float(cell) for cell in row[1:]]
            except ValueError as exc:
                raise SchemaMismatch(f"row {i}: {exc}") from None
            timestamps.append(row[0])
            hours.append(hour)
            p_rows.append((values[0], values[1], values[2]))
            cursor = 3
            if has_q:
                q_rows.append((values[3], values[4], values[5]))
                cursor = 6
            if has_n:
                n_rows.append(values[cursor])

    return MeasuredSeries(
        timestamps=tuple(timestamps),
        hours=tuple(hours),
        p_kw=tuple(p_rows),
        q_kvar=tuple(q_rows) if has_q else None,
        i_n_a=tuple(n_rows) if has_n else None,
    )


def neutral_current_proxy(
    p_kw: Sequence[float], q_kvar: Sequence[float], v_base_ln: float = 230.0
) -> float:
    """|Ia + Ib + Ic| under nominal balanced voltages, amps."""
    phasors = source_phasors(v_base_ln)
    total = 0j
    for p, q, v in zip(p_kw, q_kvar, phasors):
        total += (complex(p, q) * 1000.0 / v).conjugate()
    return abs(total)


def analyze_series(series: MeasuredSeries, v_base_ln: float = 230.0) -> ImbalanceReport:
    """Per-row spread/proxy/power factor plus per-clock-hour spread stats."""
    rows: list[dict[str, object]] = []
    by_hour: dict[int, list[float]] = {}
    for i, stamp in enumerate(series.timestamps):
        p = series.p_kw[i]
        q = series.q_kvar[i] if series.q_kvar is not None else (0.0, 0.0, 0.0)
        spread = max(p) - min(p)
        row: dict[str, object] = {
            "timestamp": stamp,
            "spread_kw": spread,
            "neutral_proxy_a": neutral_current_proxy(p, q, v_base_ln),
        }
        for label, pk, qk in zip(("a", "b", "c"), p, q):
            if series.q_kvar is None or math.hypot(pk, qk) == 0.0:
                row[f"pf_{label}"] = None
            else:
                row[f"pf_{label}"] = pk / math.hypot(pk, qk)
        if series.i_n_a is not None:
            row["i_n_measured_a"] = series.i_n_a[i]
        rows.append(row)
        by_hour.setdefault(int(series.hours[i]) % 24, []).append(spread)

    hourly = [
        {
            "hour": float(hour),
            "mean_spread_kw": sum(values) / len(values),
            "max_spread_kw": max(values),
        }
        for hour, values in sorted(by_hour.items())
    ]
    return ImbalanceReport(rows=rows, hourly=hourly)
