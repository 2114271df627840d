"""Evaluation indices for precipitation, temperature and river flow.

Distribution-based indices are computed from each series on its own and
compared afterwards; pairwise indices (correlations, MSE, monthly NSE) need
two series on the same calendar. Missing days are skipped: distribution
indices drop them per series, pairwise indices drop the whole pair.

:func:`index_report` assembles the full battery for one variable as a list
of :class:`IndexValue` rows. Monthly indices produce one row per calendar
month with ids of the form ``"rx1day:07"``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .distfit import empirical_quantile
from .errors import StructuralError, ZeroVarianceError
from .timeseries import SEASONS, DailySeries, Variable, align_pair, monthly_means, seasonal_mean

WET_DAY_MM = 1.0
PERCENTILES = np.arange(1, 100)


class Measure(str, enum.Enum):
    BIAS = "bias"
    MPE = "mean_percentage_error"
    INDEX = "index"
    MSE_RATIO = "mse_ratio"


@dataclass(frozen=True)
class IndexValue:
    """One evaluated index.

    For ``bias`` and ``mean_percentage_error`` rows, ``value`` is the error
    of ``sim_value`` against ``obs_value``. For ``index`` rows ``value`` is
    the statistic and ``obs_value`` its perfect score (1 for correlations
    and NSE, the observed statistic otherwise). ``mse_ratio`` rows carry the
    raw MSE in ``sim_value``; ``value`` is filled in by :func:`relative_mse`
    once the whole ensemble is known.
    """

    id: str
    measure: Measure
    sim_value: float
    obs_value: float
    value: float
    units: str
    flagged: bool = False

    @property
    def base_id(self) -> str:
        return self.id.split(":", 1)[0]

    @property
    def badness(self) -> float:
        """Distance from a perfect score; smaller is better."""
        if self.measure is Measure.MSE_RATIO:
            return self.value
        if self.measure is Measure.INDEX:
            return abs(self.value - self.obs_value)
        return abs(self.value)


def _valid(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[~np.isnan(x)]


def _values(s) -> np.ndarray:
    return s.values if isinstance(s, DailySeries) else np.asarray(s, dtype=np.float64)


def bias(sim: float, obs: float) -> float:
    return sim - obs


def mean_percentage_error(sim: float, obs: float) -> float:
    """Percentage error of ``sim`` relative to ``obs``; NaN when ``obs`` is 0."""
    if obs == 0 or not math.isfinite(obs):
        return float("nan")
    return 100.0 * (sim - obs) / obs


# -- distribution curves ----------------------------------------------------------

def percentile_bias_curve(sim, obs, percentiles: Sequence[float] = PERCENTILES) -> np.ndarray:
    """Quantile of ``sim`` minus quantile of ``obs`` at each percentile (all days)."""
    p = np.asarray(percentiles, dtype=np.float64) / 100.0
    return empirical_quantile(_values(sim), p) - empirical_quantile(_values(obs), p)


def q_exceed(flow, p: float):
    """Flow exceeded a fraction ``p`` of the time."""
    return empirical_quantile(_values(flow), 1.0 - np.asarray(p, dtype=np.float64))


@dataclass(frozen=True)
class FdcCurve:
    exceedance: np.ndarray
    flows: np.ndarray


def fdc(flow, grid: Sequence[float] | None = None) -> FdcCurve:
    grid = np.arange(1, 100) / 100.0 if grid is None else np.asarray(grid, dtype=np.float64)
    grid = np.sort(grid)
    flows = np.asarray(q_exceed(flow, grid), dtype=np.float64)
    # guard against last-ulp wobble in the interpolation
    flows = np.minimum.accumulate(flows)
    return FdcCurve(grid, flows)


# -- precipitation ----------------------------------------------------------------

def _runs(flags: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Start index, length and flag value of each maximal run."""
    n = flags.size
    if n == 0:
        return np.empty(0, int), np.empty(0, int), np.empty(0, bool)
    change = np.flatnonzero(flags[1:] != flags[:-1]) + 1
    starts = np.r_[0, change]
    lengths = np.diff(np.r_[starts, n])
    return starts, lengths, flags[starts]


def spell_lengths(precip: DailySeries, month: int, wet_threshold: float = WET_DAY_MM) -> tuple[float, float]:
    """Mean wet and dry spell lengths of spells starting in ``month``.

    A missing day ends the current spell without starting a new one.
    Returns NaN for a spell type with no spells in that month.
    """
    vals = precip.values
    months = precip.months
    valid = ~np.isnan(vals)
    # split at missing days so spells never bridge a gap
    seg_starts, seg_lengths, seg_valid = _runs(valid)
    wet_lens: list[np.ndarray] = []
    dry_lens: list[np.ndarray] = []
    for s0, ln, ok in zip(seg_starts, seg_lengths, seg_valid):
        if not ok:
            continue
        seg = vals[s0:s0 + ln] >= wet_threshold
        starts, lengths, kind = _runs(seg)
        in_month = months[s0 + starts] == month
        wet_lens.append(lengths[in_month & kind])
        dry_lens.append(lengths[in_month & ~kind])
    wet = np.concatenate(wet_lens) if wet_lens else np.empty(0)
    dry = np.concatenate(dry_lens) if dry_lens else np.empty(0)
    return (float(wet.mean()) if wet.size else float("nan"),
            float(dry.mean()) if dry.size else float("nan"))


def sdii(precip, wet_threshold: float = WET_DAY_MM) -> float:
    """Total precipitation divided by the number of wet days."""
    x = _valid(_values(precip))
    n_wet = int(np.count_nonzero(x >= wet_threshold))
    if n_wet == 0:
        raise ZeroVarianceError("SDII undefined: no wet days")
    return float(x.sum() / n_wet)


def _annual_mean_of(per_day: np.ndarray, years: np.ndarray) -> float:
    """Mean over calendar years of the yearly sum of ``per_day``."""
    uniq, inv = np.unique(years, return_inverse=True)
    totals = np.bincount(inv, weights=per_day, minlength=uniq.size)
    return float(totals.mean())


def _count_days(precip: DailySeries, threshold: float) -> float:
    x = precip.values
    return _annual_mean_of((x >= threshold).astype(np.float64), precip.years)


def r10(precip: DailySeries) -> float:
    return _count_days(precip, 10.0)


def r20(precip: DailySeries) -> float:
    return _count_days(precip, 20.0)


def r95p(precip: DailySeries, threshold: float | None = None, wet_only: bool = False) -> float:
    """Mean annual total from days above the series' own 95th percentile.

    With ``wet_only`` the percentile is taken over wet days only.
    """
    x = precip.values
    if threshold is None:
        pool = _valid(x)
        if wet_only:
            pool = pool[pool >= WET_DAY_MM]
        threshold = empirical_quantile(pool, 0.95) if pool.size else math.inf
    contrib = np.where(x > threshold, x, 0.0)
    contrib = np.where(np.isnan(contrib), 0.0, contrib)
    return _annual_mean_of(contrib, precip.years)


def rx1day(precip: DailySeries, month: int) -> float:
    x = precip.values[precip.months == month]
    x = _valid(x)
    return float(x.max()) if x.size else float("nan")


# -- flow ---------------------------------------------------------------------------

def q10_annual_frequency(sim_flow: DailySeries, obs_q10: float) -> float:
    """Mean number of days per year on which ``sim_flow`` exceeds ``obs_q10``."""
    x = sim_flow.values
    return _annual_mean_of((x > obs_q10).astype(np.float64), sim_flow.years)


# -- pairwise --------------------------------------------------------------------

def _pairs(sim, obs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(sim, DailySeries) and isinstance(obs, DailySeries):
        sim, obs = align_pair(sim, obs)
    a = _values(sim)
    b = _values(obs)
    if a.shape != b.shape:
        raise StructuralError("paired arrays differ in length")
    ok = ~(np.isnan(a) | np.isnan(b))
    return a[ok], b[ok]


def nse(sim, obs) -> float:
    """Nash-Sutcliffe efficiency of ``sim`` against ``obs``."""
    a, b = _pairs(sim, obs)
    if a.size < 2:
        raise StructuralError("NSE needs at least two valid pairs")
    denom = float(np.sum((b - b.mean()) ** 2))
    if denom == 0:
        raise ZeroVarianceError("NSE undefined: observations have zero variance")
    return 1.0 - float(np.sum((b - a) ** 2)) / denom


def pearson(sim, obs) -> float:
    a, b = _pairs(sim, obs)
    if a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ZeroVarianceError("Pearson correlation undefined for constant or short series")
    a = a - a.mean()
    b = b - b.mean()
    return float(np.sum(a * b) / math.sqrt(np.sum(a * a) * np.sum(b * b)))


def average_ranks(values) -> np.ndarray:
    """1-based ranks in ascending order; tied values share their mean rank."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    sx = x[order]
    starts = np.flatnonzero(np.r_[True, sx[1:] != sx[:-1]]) if x.size else np.zeros(0, int)
    stops = np.r_[starts[1:], x.size]
    ranks = np.empty(x.size)
    ranks[order] = np.repeat(0.5 * (starts + stops + 1), stops - starts)  # mean of ranks start+1..stop
    return ranks


def spearman(sim, obs) -> float:
    """Rank correlation with average ranks for ties."""
    a, b = _pairs(sim, obs)
    if a.size < 2:
        raise ZeroVarianceError("Spearman correlation needs at least two pairs")
    return pearson(average_ranks(a), average_ranks(b))


def mse(sim, obs) -> float:
    a, b = _pairs(sim, obs)
    if a.size == 0:
        raise StructuralError("MSE needs at least one valid pair")
    return float(np.mean((a - b) ** 2))


def monthly_nse(sim: DailySeries, obs: DailySeries) -> float:
    sim, obs = align_pair(sim, obs)
    _, _, ms = monthly_means(sim)
    _, _, mo = monthly_means(obs)
    return nse(ms, mo)


@dataclass(frozen=True)
class PairwiseStats:
    pearson: float
    spearman: float
    mse: float
    monthly_nse: float


def _guard(fn, *args) -> float:
    try:
        return fn(*args)
    except (ZeroVarianceError, StructuralError):
        return float("nan")


def pairwise_stats(sim: DailySeries, obs: DailySeries) -> PairwiseStats:
    """All pairwise statistics; an undefined statistic is NaN, the rest still computed."""
    sim, obs = align_pair(sim, obs)
    return PairwiseStats(_guard(pearson, sim, obs), _guard(spearman, sim, obs),
                         _guard(mse, sim, obs), _guard(monthly_nse, sim, obs))


def relative_mse(values: Iterable[float]) -> np.ndarray:
    """Divide each MSE by the largest one in the ensemble."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        raise ValueError("relative MSE of an empty ensemble")
    finite = v[np.isfinite(v)]
    if finite.size == 0:
        raise ValueError("relative MSE needs at least one finite value")
    top = finite.max()
    if top == 0:
        return np.where(np.isfinite(v), 0.0, np.nan)
    return v / top


def normalize_mse(reports: Sequence[Sequence[IndexValue]]) -> list[list[IndexValue]]:
    """Fill ``relative_mse`` rows across a group of reports sharing one denominator."""
    raw = [row.sim_value for rep in reports for row in rep if row.measure is Measure.MSE_RATIO]
    if not raw:
        return [list(rep) for rep in reports]
    finite = [x for x in raw if np.isfinite(x)]
    top = max(finite) if finite else float("nan")
    out = []
    for rep in reports:
        new = []
        for row in rep:
            if row.measure is Measure.MSE_RATIO:
                ratio = 0.0 if top == 0 else row.sim_value / top
                new.append(replace(row, value=float(ratio), obs_value=0.0))
            else:
                new.append(row)
        out.append(new)
    return out


# -- long-term measures -------------------------------------------------------------

def _mean(s: DailySeries) -> float:
    x = _valid(s.values)
    return float(x.mean()) if x.size else float("nan")


def _month_mean(s: DailySeries, month: int) -> float:
    x = _valid(s.values[s.months == month])
    return float(x.mean()) if x.size else float("nan")


@dataclass(frozen=True)
class LongTermMeasures:
    annual: tuple[float, float]  # (sim, obs) long-term daily means
    monthly: tuple[tuple[float, float], ...]  # per calendar month
    seasonal: dict[str, tuple[float, float]]

    def annual_mpe(self) -> float:
        return mean_percentage_error(*self.annual)

    def annual_bias(self) -> float:
        return bias(*self.annual)


def long_term_measures(sim: DailySeries, obs: DailySeries) -> LongTermMeasures:
    """Long-term annual, monthly and seasonal means of both series.

    Percentage errors of daily means equal those of annual or monthly totals
    when both series cover the same days.
    """
    return LongTermMeasures(
        (_mean(sim), _mean(obs)),
        tuple((_month_mean(sim, m), _month_mean(obs, m)) for m in range(1, 13)),
        {season: (seasonal_mean(sim, season), seasonal_mean(obs, season)) for season in SEASONS},
    )


# -- full battery ---------------------------------------------------------------------

def _row(id_: str, measure: Measure, sim: float, obs: float, units: str) -> IndexValue:
    if measure is Measure.BIAS:
        value = bias(sim, obs)
    elif measure is Measure.MPE:
        value = mean_percentage_error(sim, obs)
    else:
        value = sim
    flagged = not math.isfinite(value)
    return IndexValue(id_, measure, float(sim), float(obs), float(value), units, flagged)


def _index(id_: str, value: float, perfect: float = 1.0) -> IndexValue:
    return IndexValue(id_, Measure.INDEX, float(value), float(perfect), float(value), "-",
                      not math.isfinite(value))


def precipitation_indices(sim: DailySeries, obs: DailySeries, wet_only_percentiles: bool = False) -> list[IndexValue]:
    rows = []
    s_vals, o_vals = _valid(sim.values), _valid(obs.values)
    if wet_only_percentiles:
        s_vals, o_vals = s_vals[s_vals >= WET_DAY_MM], o_vals[o_vals >= WET_DAY_MM]
    for p in (95, 90, 50, 25):
        rows.append(_row(f"p{p}", Measure.BIAS, empirical_quantile(s_vals, p / 100),
                         empirical_quantile(o_vals, p / 100), "mm/day"))
    for m in range(1, 13):
        sw, sd = spell_lengths(sim, m)
        ow, od = spell_lengths(obs, m)
        rows.append(_row(f"wet_spell_length:{m:02d}", Measure.BIAS, sw, ow, "days"))
        rows.append(_row(f"dry_spell_length:{m:02d}", Measure.BIAS, sd, od, "days"))
    lt = long_term_measures(sim, obs)
    rows.append(_row("annual_mean", Measure.MPE, *lt.annual, "%"))
    for m, (s, o) in enumerate(lt.monthly, start=1):
        rows.append(_row(f"monthly_mean:{m:02d}", Measure.MPE, s, o, "%"))
    pw = pairwise_stats(sim, obs)
    rows.append(IndexValue("relative_mse", Measure.MSE_RATIO, pw.mse, 0.0, float("nan"), "-",
                           not math.isfinite(pw.mse)))
    rows.append(_index("spearman", pw.spearman))
    for m in range(1, 13):
        rows.append(_row(f"rx1day:{m:02d}", Measure.MPE, rx1day(sim, m), rx1day(obs, m), "%"))
    rows.append(_row("sdii", Measure.INDEX, _guard(sdii, sim), _guard(sdii, obs), "mm/day"))
    rows.append(_row("r10", Measure.BIAS, r10(sim), r10(obs), "days/yr"))
    rows.append(_row("r20", Measure.BIAS, r20(sim), r20(obs), "days/yr"))
    rows.append(_row("r95p", Measure.MPE, r95p(sim, wet_only=wet_only_percentiles),
                     r95p(obs, wet_only=wet_only_percentiles), "%"))
    return rows


def temperature_indices(sim: DailySeries, obs: DailySeries) -> list[IndexValue]:
    lt = long_term_measures(sim, obs)
    rows = [_row("annual_mean", Measure.BIAS, *lt.annual, "degC"),
            _row("annual_mean_mpe", Measure.MPE, *lt.annual, "%")]
    for m, (s, o) in enumerate(lt.monthly, start=1):
        rows.append(_row(f"monthly_mean:{m:02d}", Measure.BIAS, s, o, "degC"))
        rows.append(_row(f"monthly_mean_mpe:{m:02d}", Measure.MPE, s, o, "%"))
    s_vals, o_vals = _valid(sim.values), _valid(obs.values)
    rows.append(_row("p99", Measure.BIAS, empirical_quantile(s_vals, 0.99),
                     empirical_quantile(o_vals, 0.99), "degC"))
    rows.append(_row("p1", Measure.BIAS, empirical_quantile(s_vals, 0.01),
                     empirical_quantile(o_vals, 0.01), "degC"))
    rows.append(_index("pearson", _guard(pearson, sim, obs)))
    return rows


def flow_indices(sim: DailySeries, obs: DailySeries) -> list[IndexValue]:
    obs_q10 = float(q_exceed(obs, 0.10))
    rows = [_row("q10", Measure.BIAS, float(q_exceed(sim, 0.10)), obs_q10, "m3/s"),
            _row("q95", Measure.BIAS, float(q_exceed(sim, 0.95)), float(q_exceed(obs, 0.95)), "m3/s"),
            _row("q10_annual_frequency", Measure.BIAS, q10_annual_frequency(sim, obs_q10),
                 q10_annual_frequency(obs, obs_q10), "days/yr")]
    lt = long_term_measures(sim, obs)
    rows.append(_row("annual_mean", Measure.MPE, *lt.annual, "%"))
    for season in SEASONS:
        rows.append(_row(f"{season.lower()}_mean", Measure.MPE, *lt.seasonal[season], "%"))
    pw = pairwise_stats(sim, obs)
    rows.append(_index("monthly_nse", pw.monthly_nse))
    rows.append(IndexValue("relative_mse", Measure.MSE_RATIO, pw.mse, 0.0, float("nan"), "-",
                           not math.isfinite(pw.mse)))
    rows.append(_index("spearman", pw.spearman))
    return rows


def index_report(sim: DailySeries, obs: DailySeries, **kwargs) -> list[IndexValue]:
    """Full index battery for the variable shared by ``sim`` and ``obs``.

    Both series are first restricted to their common period.
    """
    if sim.variable is not obs.variable:
        raise StructuralError("sim and obs carry different variables")
    sim, obs = align_pair(sim, obs)
    if sim.variable is Variable.PRECIP:
        return precipitation_indices(sim, obs, **kwargs)
    if sim.variable is Variable.TEMP:
        return temperature_indices(sim, obs)
    if sim.variable is Variable.FLOW:
        return flow_indices(sim, obs)
    raise StructuralError(f"no index battery for {sim.variable.value}")


# Index columns ranked for each variable, in the order of the published rank tables.
RANKED_INDICES = {
    Variable.TEMP: ("p99", "p1", "annual_mean", "monthly_mean", "pearson"),
    Variable.PRECIP: ("p95", "p90", "p50", "p25", "annual_mean", "relative_mse",
                      "dry_spell_length", "wet_spell_length", "monthly_mean", "spearman",
                      "sdii", "r10", "r20", "r95p", "rx1day"),
    Variable.FLOW: ("annual_mean", "djf_mean", "mam_mean", "jja_mean", "son_mean",
                    "monthly_nse", "relative_mse", "spearman", "q10", "q10_annual_frequency", "q95"),
}
