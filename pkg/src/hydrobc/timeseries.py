"""Calendar-aware daily series.

A :class:`DailySeries` is a gap-free run of daily values starting at a
:class:`DateStamp`. Missing observations are stored as NaN. Three model
calendars are supported: the proleptic Gregorian calendar, a 365-day
calendar without leap days and a 360-day calendar of twelve 30-day months.
"""

from __future__ import annotations

import datetime as _dt
import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import CalendarMismatchError, StructuralError


class Calendar(str, enum.Enum):
    GREGORIAN = "gregorian"
    NOLEAP = "noleap365"
    FIXED360 = "fixed360"

    @classmethod
    def parse(cls, value: "str | Calendar") -> "Calendar":
        if isinstance(value, Calendar):
            return value
        aliases = {
            "standard": cls.GREGORIAN,
            "proleptic_gregorian": cls.GREGORIAN,
            "noleap": cls.NOLEAP,
            "365_day": cls.NOLEAP,
            "360_day": cls.FIXED360,
        }
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise StructuralError(f"unknown calendar {value!r}") from None


class Variable(str, enum.Enum):
    PRECIP = "precip_mm_day"
    TEMP = "temp_degC"
    PET = "pet_mm_day"
    FLOW = "flow_m3s"

    @property
    def units(self) -> str:
        return _UNITS[self]

    @property
    def nonnegative(self) -> bool:
        return self in (Variable.PRECIP, Variable.PET, Variable.FLOW)


_UNITS = {
    Variable.PRECIP: "mm/day",
    Variable.TEMP: "degC",
    Variable.PET: "mm/day",
    Variable.FLOW: "m3/s",
}

_MONTH_DAYS = np.array([31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31])
_NOLEAP_CUM = np.concatenate([[0], np.cumsum(_MONTH_DAYS)])

SEASONS = ("DJF", "MAM", "JJA", "SON")
_SEASON_OF_MONTH = {12: "DJF", 1: "DJF", 2: "DJF", 3: "MAM", 4: "MAM", 5: "MAM",
                    6: "JJA", 7: "JJA", 8: "JJA", 9: "SON", 10: "SON", 11: "SON"}


def _is_leap(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def month_length(calendar: Calendar, year: int, month: int) -> int:
    if calendar is Calendar.FIXED360:
        return 30
    if month == 2 and calendar is Calendar.GREGORIAN and _is_leap(year):
        return 29
    return int(_MONTH_DAYS[month - 1])


def year_length(calendar: Calendar, year: int) -> int:
    if calendar is Calendar.FIXED360:
        return 360
    if calendar is Calendar.GREGORIAN and _is_leap(year):
        return 366
    return 365


@dataclass(frozen=True, order=True)
class DateStamp:
    year: int
    month: int
    day: int

    @classmethod
    def parse(cls, text: str) -> "DateStamp":
        parts = text.strip().split("-")
        if len(parts) != 3:
            raise StructuralError(f"bad date {text!r}, expected YYYY-MM-DD")
        try:
            y, m, d = (int(p) for p in parts)
        except ValueError:
            raise StructuralError(f"bad date {text!r}, expected YYYY-MM-DD") from None
        if not (1 <= m <= 12 and 1 <= d <= 31):  # calendar-specific checks come with validate()
            raise StructuralError(f"bad date {text!r}: month or day out of range")
        return cls(y, m, d)

    def validate(self, calendar: Calendar) -> "DateStamp":
        if not 1 <= self.month <= 12:
            raise StructuralError(f"month out of range in {self}")
        if not 1 <= self.day <= month_length(calendar, self.year, self.month):
            raise StructuralError(f"{self} is not a valid {calendar.value} date")
        return self

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"


def to_ordinal(date: DateStamp, calendar: Calendar) -> int:
    """Day count of ``date`` from an arbitrary calendar-specific epoch."""
    date.validate(calendar)
    if calendar is Calendar.GREGORIAN:
        return _dt.date(date.year, date.month, date.day).toordinal()
    if calendar is Calendar.NOLEAP:
        return 365 * date.year + int(_NOLEAP_CUM[date.month - 1]) + date.day - 1
    return 360 * date.year + 30 * (date.month - 1) + date.day - 1


def from_ordinal(n: int, calendar: Calendar) -> DateStamp:
    if calendar is Calendar.GREGORIAN:
        d = _dt.date.fromordinal(int(n))
        return DateStamp(d.year, d.month, d.day)
    if calendar is Calendar.NOLEAP:
        year, doy = divmod(int(n), 365)
        month = int(np.searchsorted(_NOLEAP_CUM, doy, side="right"))
        return DateStamp(year, month, doy - int(_NOLEAP_CUM[month - 1]) + 1)
    year, doy = divmod(int(n), 360)
    return DateStamp(year, doy // 30 + 1, doy % 30 + 1)


def _date_fields(calendar: Calendar, start_ordinal: int, n: int):
    ords = start_ordinal + np.arange(n, dtype=np.int64)
    if calendar is Calendar.GREGORIAN:
        # proleptic ordinal 1 is 0001-01-01; datetime64 counts from 1970-01-01
        days = (ords - _dt.date(1970, 1, 1).toordinal()).astype("datetime64[D]")
        years = days.astype("datetime64[Y]").astype(np.int64) + 1970
        month_start = days.astype("datetime64[M]")
        months = month_start.astype(np.int64) % 12 + 1
        dom = (days - month_start.astype("datetime64[D]")).astype(np.int64) + 1
        year_start = days.astype("datetime64[Y]").astype("datetime64[D]")
        doy = (days - year_start).astype(np.int64) + 1
        leap = (years % 4 == 0) & ((years % 100 != 0) | (years % 400 == 0))
        ylen = np.where(leap, 366, 365)
    elif calendar is Calendar.NOLEAP:
        years, doy0 = np.divmod(ords, 365)
        months = np.searchsorted(_NOLEAP_CUM, doy0, side="right")
        dom = doy0 - _NOLEAP_CUM[months - 1] + 1
        doy = doy0 + 1
        ylen = np.full(n, 365)
    else:
        years, doy0 = np.divmod(ords, 360)
        months = doy0 // 30 + 1
        dom = doy0 % 30 + 1
        doy = doy0 + 1
        ylen = np.full(n, 360)
    return years, months.astype(np.int64), dom.astype(np.int64), doy.astype(np.int64), ylen


@dataclass(frozen=True, eq=False)
class DailySeries:
    """Daily values of one variable under one calendar.

    ``values[i]`` belongs to the date ``start`` advanced by ``i`` days. The
    value array is copied on construction and made read-only.
    """

    variable: Variable
    calendar: Calendar
    start: DateStamp
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variable", Variable(self.variable))
        object.__setattr__(self, "calendar", Calendar.parse(self.calendar))
        self.start.validate(self.calendar)
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if vals.size < 1:
            raise StructuralError("a daily series needs at least one value")
        if self.variable.nonnegative and np.any(vals < 0):
            raise StructuralError(f"negative values in a {self.variable.value} series")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        return (f"DailySeries({self.variable.value}, {self.calendar.value}, "
                f"{self.start}..{self.end}, n={len(self)})")

    @cached_property
    def start_ordinal(self) -> int:
        return to_ordinal(self.start, self.calendar)

    @property
    def end(self) -> DateStamp:
        return from_ordinal(self.start_ordinal + len(self) - 1, self.calendar)

    @property
    def units(self) -> str:
        return self.variable.units

    @cached_property
    def _fields(self):
        return _date_fields(self.calendar, self.start_ordinal, len(self))

    @property
    def years(self) -> np.ndarray:
        return self._fields[0]

    @property
    def months(self) -> np.ndarray:
        return self._fields[1]

    @property
    def days(self) -> np.ndarray:
        return self._fields[2]

    @property
    def day_of_year(self) -> np.ndarray:
        return self._fields[3]

    @property
    def year_lengths(self) -> np.ndarray:
        return self._fields[4]

    def date_at(self, i: int) -> DateStamp:
        if not 0 <= i < len(self):
            raise IndexError(i)
        return from_ordinal(self.start_ordinal + i, self.calendar)

    def iso_dates(self) -> list[str]:
        return [f"{y:04d}-{m:02d}-{d:02d}" for y, m, d in zip(self.years, self.months, self.days)]

    def index_of(self, date: DateStamp) -> int:
        """Position of ``date`` in the series (may fall outside ``[0, len)``)."""
        return to_ordinal(date, self.calendar) - self.start_ordinal

    def islice(self, i0: int, i1: int) -> "DailySeries":
        if not 0 <= i0 < i1 <= len(self):
            raise StructuralError(f"slice [{i0}, {i1}) outside series of length {len(self)}")
        return DailySeries(self.variable, self.calendar, self.date_at(i0), self.values[i0:i1])

    def between(self, first: DateStamp, last: DateStamp) -> "DailySeries":
        """Inclusive date-range selection, clipped to the series."""
        i0 = max(self.index_of(first), 0)
        i1 = min(self.index_of(last) + 1, len(self))
        if i1 <= i0:
            raise StructuralError(f"no data between {first} and {last}")
        return self.islice(i0, i1)

    def with_values(self, values, variable: Variable | None = None) -> "DailySeries":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise StructuralError("replacement values must keep the series length")
        return DailySeries(variable or self.variable, self.calendar, self.start, values)

    def same_axis(self, other: "DailySeries") -> bool:
        return (self.calendar is other.calendar and self.start == other.start
                and len(self) == len(other))


@dataclass(frozen=True)
class CellSet:
    """Grid cells covering a catchment, with nonnegative area weights."""

    cells: Sequence[tuple[DailySeries, float]]

    def __post_init__(self) -> None:
        if not self.cells:
            raise StructuralError("a cell set needs at least one cell")
        first = self.cells[0][0]
        for s, w in self.cells:
            if not (w >= 0 and np.isfinite(w)):
                raise StructuralError(f"cell weight must be finite and nonnegative, got {w}")
            if s.variable is not first.variable:
                raise StructuralError("cells carry different variables")
            if not s.same_axis(first):
                raise StructuralError("cells do not share calendar, start and length")
        if sum(w for _, w in self.cells) <= 0:
            raise StructuralError("cell weights sum to zero")

    @classmethod
    def equal(cls, series: Iterable[DailySeries]) -> "CellSet":
        return cls([(s, 1.0) for s in series])

    @property
    def weights(self) -> np.ndarray:
        w = np.array([w for _, w in self.cells], dtype=np.float64)
        return w / w.sum()


def catchment_average(cells: CellSet) -> DailySeries:
    """Weighted mean of the cells covering a catchment."""
    first = cells.cells[0][0]
    if len(cells.cells) == 1:
        return first
    stack = np.vstack([s.values for s, _ in cells.cells])
    return first.with_values(cells.weights @ stack)


def group_by_month(s: DailySeries) -> list[np.ndarray]:
    """Twelve arrays; element ``m - 1`` holds the values of calendar month ``m``.

    Missing values are kept so the bags partition the series.
    """
    months = s.months
    return [s.values[months == m] for m in range(1, 13)]


def monthly_means(s: DailySeries) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean of each calendar month present in the series.

    Returns:
        ``(years, months, means)``. A month with no valid day has a NaN mean.
    """
    key = s.years * 12 + (s.months - 1)
    # key is nondecreasing along the series, so run boundaries are month boundaries
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    vals = s.values
    valid = ~np.isnan(vals)
    sums = np.add.reduceat(np.where(valid, vals, 0.0), starts)
    counts = np.add.reduceat(valid.astype(np.int64), starts)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return key[starts] // 12, key[starts] % 12 + 1, means


def season_of(month: int) -> str:
    return _SEASON_OF_MONTH[int(month)]


def seasonal_mean(s: DailySeries, season: str) -> float:
    """Mean over every valid day whose month falls in ``season``, pooled across years."""
    if season not in SEASONS:
        raise StructuralError(f"unknown season {season!r}")
    members = [m for m, name in _SEASON_OF_MONTH.items() if name == season]
    vals = s.values[np.isin(s.months, members)]
    vals = vals[~np.isnan(vals)]
    return float(vals.mean()) if vals.size else float("nan")


def align_pair(a: DailySeries, b: DailySeries) -> tuple[DailySeries, DailySeries]:
    """Restrict two series to their common date range."""
    if a.calendar is not b.calendar:
        raise CalendarMismatchError(
            f"cannot pair a {a.calendar.value} series with a {b.calendar.value} series")
    lo = max(a.start_ordinal, b.start_ordinal)
    hi = min(a.start_ordinal + len(a), b.start_ordinal + len(b))
    if hi <= lo:
        raise StructuralError(f"series {a.start}..{a.end} and {b.start}..{b.end} do not overlap")
    return (a.islice(lo - a.start_ordinal, hi - a.start_ordinal),
            b.islice(lo - b.start_ordinal, hi - b.start_ordinal))


def kfold_blocks(n: int | DailySeries, k: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into ``k`` contiguous half-open blocks.

    Block lengths differ by at most one; the first ``n % k`` blocks take the
    extra day.
    """
    if isinstance(n, DailySeries):
        n = len(n)
    if k < 2:
        raise StructuralError(f"need at least 2 folds, got {k}")
    if k > n:
        raise StructuralError(f"cannot cut {n} days into {k} blocks")
    base, extra = divmod(n, k)
    blocks = []
    start = 0
    for i in range(k):
        stop = start + base + (1 if i < extra else 0)
        blocks.append((start, stop))
        start = stop
    return blocks
