"""CSV and JSON persistence for daily series.

A series file is a two-column CSV (``date,value``) with ISO dates read under
the series calendar and empty fields for missing days. The variable and
calendar live either in a JSON sidecar next to the CSV (``flow.csv`` ->
``flow.meta.json``) or are supplied by the caller.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import StructuralError
from .timeseries import Calendar, DailySeries, DateStamp, Variable, to_ordinal


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".meta.json")


def _format_value(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def read_series(path: str | Path, variable: str | Variable | None = None,
                calendar: str | Calendar | None = None) -> DailySeries:
    """Load a series CSV, taking metadata from arguments or the sidecar.

    Explicit arguments win over the sidecar. Dates must be consecutive.
    """
    path = Path(path)
    meta: dict[str, Any] = {}
    side = sidecar_path(path)
    if side.exists() and side != path:
        meta = json.loads(side.read_text(encoding="utf-8"))
    variable = variable or meta.get("variable")
    calendar = calendar or meta.get("calendar", "gregorian")
    if variable is None:
        raise StructuralError(f"{path}: variable unknown (no sidecar and none given)")
    try:
        variable = Variable(variable)
    except ValueError:
        raise StructuralError(f"{path}: unknown variable {variable!r}") from None
    calendar = Calendar.parse(calendar)

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["date", "value"]:
            raise StructuralError(f"{path}: expected header 'date,value'")
        dates, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise StructuralError(f"{path}:{lineno}: expected two fields")
            dates.append(row[0])
            field = row[1].strip()
            try:
                values.append(float(field) if field else math.nan)
            except ValueError:
                raise StructuralError(f"{path}:{lineno}: bad value {field!r}") from None
    if not dates:
        raise StructuralError(f"{path}: no data rows")
    start = DateStamp.parse(dates[0])
    first = to_ordinal(start, calendar)
    last = to_ordinal(DateStamp.parse(dates[-1]), calendar)
    if last - first + 1 != len(dates):
        raise StructuralError(f"{path}: dates are not consecutive under the {calendar.value} calendar")
    series = DailySeries(variable, calendar, start, np.array(values))
    for i, (got, want) in enumerate(zip(dates, series.iso_dates())):
        if got.strip() != want:
            raise StructuralError(f"{path}:{i + 2}: expected date {want}, found {got!r}")
    return series


def write_series(series: DailySeries, path: str | Path, sidecar: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "value"])
        for date, v in zip(series.iso_dates(), series.values):
            writer.writerow([date, _format_value(v)])
    if sidecar:
        write_json(sidecar_path(path), {
            "variable": series.variable.value,
            "calendar": series.calendar.value,
            "units": series.units,
        })
    return path


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n",
                    encoding="utf-8")
    return path


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_rows(path: str | Path, header: list[str], rows) -> Path:
    """Write a long-format CSV; floats are written at full precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(v) if isinstance(v, float) else v for v in row])
    return path


def read_rows(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
