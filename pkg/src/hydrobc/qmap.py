"""Parametric quantile mapping.

Three transfer functions are trained per calendar month:

* NQM maps temperature through fitted Normal CDFs.
* GQM zeroes simulated days below a wet-day threshold (chosen so the number
  of dry days matches the observations) and maps wet days through fitted
  Gamma CDFs.
* DGQM does the same but splits the wet-day distribution at its 90th
  percentile. Values below the split are mapped with Gammas fitted to the
  lower segment, renormalised so the split maps onto the observed split;
  exceedances above the split are mapped with Gammas fitted to the
  exceedances. The resulting map is continuous at the split.

Maps are immutable, JSON-serialisable and applied elementwise with
:meth:`apply` or the module-level ``apply_*`` helpers.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .distfit import (DEFAULT_OBS_DRY_THRESHOLD, MIN_WET_VALUES, GammaParams, NormalParams,
                      WetDayModel, empirical_quantile, fit_gamma_mle, fit_normal,
                      obs_wet_values, sim_wet_values, wet_day_threshold)
from .errors import FitError, StructuralError
from .timeseries import DailySeries, Variable, align_pair, kfold_blocks

logger = logging.getLogger(__name__)

CDF_EPS = 1e-9
SPLIT_QUANTILE = 0.9


class QmMethod(str, enum.Enum):
    NQM = "nqm"
    GQM = "gqm"
    DGQM = "dgqm"

    @classmethod
    def parse(cls, value: "str | QmMethod") -> "QmMethod":
        if isinstance(value, QmMethod):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise StructuralError(f"unknown correction method {value!r}") from None

    @property
    def variable(self) -> Variable:
        return Variable.TEMP if self is QmMethod.NQM else Variable.PRECIP


def _as_month_array(months, shape) -> np.ndarray:
    m = np.broadcast_to(np.asarray(months, dtype=np.int64), shape)
    if m.size and (m.min() < 1 or m.max() > 12):
        raise ValueError("months must lie in 1..12")
    return m


def _scalar_or_array(out: np.ndarray, like):
    return float(out) if np.ndim(like) == 0 else out


# -- Normal QM -----------------------------------------------------------------

@dataclass(frozen=True)
class NormalMonth:
    sim: NormalParams
    obs: NormalParams

    def apply(self, x: np.ndarray) -> np.ndarray:
        # Normal-to-Normal CDF composition reduces to a standardised affine map
        return self.obs.mean + self.obs.sd * (x - self.sim.mean) / self.sim.sd


@dataclass(frozen=True)
class MonthlyNormalMap:
    months: tuple  # 12 entries of NormalMonth, or None for an identity month

    method = QmMethod.NQM

    def apply(self, values, months):
        x = np.asarray(values, dtype=np.float64)
        m = _as_month_array(months, x.shape)
        out = x.copy()
        for i, entry in enumerate(self.months, start=1):
            if entry is None:
                continue
            sel = m == i
            if np.any(sel):
                out[sel] = entry.apply(x[sel])
        return _scalar_or_array(out, values)

    def to_dict(self) -> dict:
        return {"method": self.method.value, "months": [
            None if e is None else {"sim": e.sim.to_dict(), "obs": e.obs.to_dict()}
            for e in self.months]}

    @classmethod
    def from_dict(cls, d: dict) -> "MonthlyNormalMap":
        return cls(tuple(None if e is None else NormalMonth(NormalParams.from_dict(e["sim"]),
                                                            NormalParams.from_dict(e["obs"]))
                         for e in d["months"]))


def _train_nqm_bags(sim_bags, obs_bags) -> MonthlyNormalMap:
    entries = []
    for month, (s, o) in enumerate(zip(sim_bags, obs_bags), start=1):
        try:
            entries.append(NormalMonth(fit_normal(s, month), fit_normal(o, month)))
        except FitError as exc:
            logger.warning("NQM identity fallback: %s", exc)
            entries.append(None)
    return MonthlyNormalMap(tuple(entries))


def train_nqm(sim: DailySeries, obs: DailySeries) -> MonthlyNormalMap:
    _check_variable(sim, obs, Variable.TEMP)
    sim, obs = align_pair(sim, obs)
    return _train_nqm_bags(*_month_bags(sim, obs, np.arange(len(sim))))


def apply_nqm(tf: MonthlyNormalMap, sim_value, month):
    return tf.apply(sim_value, month)


# -- Gamma QM --------------------------------------------------------------------

@dataclass(frozen=True)
class GammaMonth:
    wet: WetDayModel | None
    obs_dry_threshold: float
    obs: GammaParams | None

    @property
    def fallback(self) -> bool:
        return self.wet is None or self.obs is None

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.fallback:
            return x.copy()
        out = np.zeros_like(x)
        wet = (x >= self.wet.sim_threshold) & (x > 0)
        out[np.isnan(x)] = np.nan
        if np.any(wet):
            u = np.clip(self.wet.gamma.cdf(x[wet]), CDF_EPS, 1.0 - CDF_EPS)
            out[wet] = self.obs.ppf(u)
        return out

    def to_dict(self) -> dict:
        return {"fallback": self.fallback,
                "obs_dry_threshold": self.obs_dry_threshold,
                "wet": None if self.wet is None else self.wet.to_dict(),
                "obs": None if self.obs is None else self.obs.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "GammaMonth":
        return cls(None if d.get("wet") is None else WetDayModel.from_dict(d["wet"]),
                   float(d["obs_dry_threshold"]),
                   None if d.get("obs") is None else GammaParams.from_dict(d["obs"]))


@dataclass(frozen=True)
class MonthlyGammaMap:
    months: tuple  # 12 GammaMonth

    method = QmMethod.GQM

    def apply(self, values, months):
        x = np.asarray(values, dtype=np.float64)
        if np.any(x < 0):
            raise ValueError("precipitation must be nonnegative")
        m = _as_month_array(months, x.shape)
        out = np.empty_like(x)
        for i, entry in enumerate(self.months, start=1):
            sel = m == i
            if np.any(sel):
                out[sel] = entry.apply(x[sel])
        return _scalar_or_array(out, values)

    def to_dict(self) -> dict:
        return {"method": self.method.value, "months": [e.to_dict() for e in self.months]}

    @classmethod
    def from_dict(cls, d: dict) -> "MonthlyGammaMap":
        return cls(tuple(GammaMonth.from_dict(e) for e in d["months"]))


def _train_gamma_month(s: np.ndarray, o: np.ndarray, obs_dry_threshold: float,
                       month: int) -> tuple[GammaMonth, np.ndarray, np.ndarray]:
    """Train one GQM month; also return the wet samples used on each side."""
    s = s[~np.isnan(s)]
    o = o[~np.isnan(o)]
    if s.size == 0 or o.size == 0:
        logger.warning("GQM identity fallback: month %02d has no training data", month)
        return GammaMonth(None, obs_dry_threshold, None), s[:0], o[:0]
    thr, dry_fraction = wet_day_threshold(s, o, obs_dry_threshold)
    s_wet = sim_wet_values(s, thr)
    o_wet = obs_wet_values(o, obs_dry_threshold)
    try:
        sim_gamma = fit_gamma_mle(s_wet, month=month)
        obs_gamma = fit_gamma_mle(o_wet, month=month)
    except FitError as exc:
        logger.warning("GQM identity fallback: %s", exc)
        return GammaMonth(None, obs_dry_threshold, None), s_wet, o_wet
    return GammaMonth(WetDayModel(thr, dry_fraction, sim_gamma), obs_dry_threshold, obs_gamma), s_wet, o_wet


def _train_gqm_bags(sim_bags, obs_bags, obs_dry_threshold: float) -> MonthlyGammaMap:
    return MonthlyGammaMap(tuple(
        _train_gamma_month(s, o, obs_dry_threshold, month)[0]
        for month, (s, o) in enumerate(zip(sim_bags, obs_bags), start=1)))


def train_gqm(sim: DailySeries, obs: DailySeries,
              obs_dry_threshold: float = DEFAULT_OBS_DRY_THRESHOLD) -> MonthlyGammaMap:
    _check_variable(sim, obs, Variable.PRECIP)
    sim, obs = align_pair(sim, obs)
    return _train_gqm_bags(*_month_bags(sim, obs, np.arange(len(sim))), obs_dry_threshold)


def apply_gqm(tf: MonthlyGammaMap, sim_value, month):
    return tf.apply(sim_value, month)


# -- Double Gamma QM -------------------------------------------------------------

@dataclass(frozen=True)
class DoubleGammaMonth:
    base: GammaMonth
    split_sim: float | None = None
    split_obs: float | None = None
    lower_sim: GammaParams | None = None
    lower_obs: GammaParams | None = None
    upper_sim: GammaParams | None = None
    upper_obs: GammaParams | None = None

    @property
    def lower_fallback(self) -> bool:
        return self.lower_sim is None or self.lower_obs is None

    @property
    def upper_fallback(self) -> bool:
        return self.upper_sim is None or self.upper_obs is None

    def apply_lower(self, x: np.ndarray) -> np.ndarray:
        q = self.lower_sim.cdf(x) / self.lower_sim.cdf(self.split_sim)
        target = q * self.lower_obs.cdf(self.split_obs)
        return self.lower_obs.ppf(np.clip(target, 0.0, 1.0 - CDF_EPS))

    def apply_upper(self, x: np.ndarray) -> np.ndarray:
        u = np.clip(self.upper_sim.cdf(x - self.split_sim), 0.0, 1.0 - CDF_EPS)
        return self.split_obs + self.upper_obs.ppf(u)

    def apply(self, x: np.ndarray) -> np.ndarray:
        base = self.base
        if base.fallback or self.lower_fallback:
            return base.apply(x)
        out = np.zeros_like(x)
        out[np.isnan(x)] = np.nan
        wet = (x >= base.wet.sim_threshold) & (x > 0)
        low = wet & (x <= self.split_sim)
        high = wet & (x > self.split_sim)
        if np.any(low):
            out[low] = self.apply_lower(x[low])
        if np.any(high):
            out[high] = base.apply(x[high]) if self.upper_fallback else self.apply_upper(x[high])
        return out

    def to_dict(self) -> dict:
        def g(p):
            return None if p is None else p.to_dict()
        return {"base": self.base.to_dict(), "split_sim": self.split_sim,
                "split_obs": self.split_obs, "lower_sim": g(self.lower_sim),
                "lower_obs": g(self.lower_obs), "upper_sim": g(self.upper_sim),
                "upper_obs": g(self.upper_obs), "upper_fallback": self.upper_fallback}

    @classmethod
    def from_dict(cls, d: dict) -> "DoubleGammaMonth":
        def g(key):
            return None if d.get(key) is None else GammaParams.from_dict(d[key])
        return cls(GammaMonth.from_dict(d["base"]), d.get("split_sim"), d.get("split_obs"),
                   g("lower_sim"), g("lower_obs"), g("upper_sim"), g("upper_obs"))


@dataclass(frozen=True)
class MonthlyDoubleGammaMap:
    months: tuple  # 12 DoubleGammaMonth

    method = QmMethod.DGQM

    @property
    def gamma_map(self) -> MonthlyGammaMap:
        return MonthlyGammaMap(tuple(e.base for e in self.months))

    def apply(self, values, months):
        x = np.asarray(values, dtype=np.float64)
        if np.any(x < 0):
            raise ValueError("precipitation must be nonnegative")
        m = _as_month_array(months, x.shape)
        out = np.empty_like(x)
        for i, entry in enumerate(self.months, start=1):
            sel = m == i
            if np.any(sel):
                out[sel] = entry.apply(x[sel])
        return _scalar_or_array(out, values)

    def to_dict(self) -> dict:
        return {"method": self.method.value, "split_quantile": SPLIT_QUANTILE,
                "months": [e.to_dict() for e in self.months]}

    @classmethod
    def from_dict(cls, d: dict) -> "MonthlyDoubleGammaMap":
        return cls(tuple(DoubleGammaMonth.from_dict(e) for e in d["months"]))


def _train_dgqm_month(s, o, obs_dry_threshold: float, month: int) -> DoubleGammaMonth:
    base, s_wet, o_wet = _train_gamma_month(s, o, obs_dry_threshold, month)
    if base.fallback:
        return DoubleGammaMonth(base)
    split_sim = float(empirical_quantile(s_wet, SPLIT_QUANTILE))
    split_obs = float(empirical_quantile(o_wet, SPLIT_QUANTILE))
    try:
        lower_sim = fit_gamma_mle(s_wet[s_wet <= split_sim], month=month)
        lower_obs = fit_gamma_mle(o_wet[o_wet <= split_obs], month=month)
    except FitError as exc:
        logger.warning("DGQM month falls back to GQM: %s", exc)
        return DoubleGammaMonth(base, split_sim, split_obs)
    try:
        upper_sim = fit_gamma_mle(s_wet[s_wet > split_sim] - split_sim, month=month)
        upper_obs = fit_gamma_mle(o_wet[o_wet > split_obs] - split_obs, month=month)
    except FitError as exc:
        logger.warning("DGQM upper segment falls back to GQM: %s", exc)
        return DoubleGammaMonth(base, split_sim, split_obs, lower_sim, lower_obs)
    return DoubleGammaMonth(base, split_sim, split_obs, lower_sim, lower_obs, upper_sim, upper_obs)


def _train_dgqm_bags(sim_bags, obs_bags, obs_dry_threshold: float) -> MonthlyDoubleGammaMap:
    return MonthlyDoubleGammaMap(tuple(
        _train_dgqm_month(s, o, obs_dry_threshold, month)
        for month, (s, o) in enumerate(zip(sim_bags, obs_bags), start=1)))


def train_dgqm(sim: DailySeries, obs: DailySeries,
               obs_dry_threshold: float = DEFAULT_OBS_DRY_THRESHOLD) -> MonthlyDoubleGammaMap:
    _check_variable(sim, obs, Variable.PRECIP)
    sim, obs = align_pair(sim, obs)
    return _train_dgqm_bags(*_month_bags(sim, obs, np.arange(len(sim))), obs_dry_threshold)


def apply_dgqm(tf: MonthlyDoubleGammaMap, sim_value, month):
    return tf.apply(sim_value, month)


# -- shared plumbing -------------------------------------------------------------

TransferFunction = Union[MonthlyNormalMap, MonthlyGammaMap, MonthlyDoubleGammaMap]

_MAP_TYPES = {QmMethod.NQM: MonthlyNormalMap, QmMethod.GQM: MonthlyGammaMap,
              QmMethod.DGQM: MonthlyDoubleGammaMap}


def transfer_function_from_dict(d: dict) -> TransferFunction:
    return _MAP_TYPES[QmMethod.parse(d["method"])].from_dict(d)


def _check_variable(sim: DailySeries, obs: DailySeries, expected: Variable) -> None:
    for name, s in (("sim", sim), ("obs", obs)):
        if s.variable is not expected:
            raise StructuralError(f"{name} series is {s.variable.value}, expected {expected.value}")


def _month_bags(sim: DailySeries, obs: DailySeries, idx: np.ndarray):
    """Month bags of the aligned pair restricted to positions ``idx``."""
    months = sim.months[idx]
    sv = sim.values[idx]
    ov = obs.values[idx]
    sim_bags = [sv[months == m] for m in range(1, 13)]
    obs_bags = [ov[months == m] for m in range(1, 13)]
    return sim_bags, obs_bags


def train(method: str | QmMethod, sim: DailySeries, obs: DailySeries,
          obs_dry_threshold: float = DEFAULT_OBS_DRY_THRESHOLD) -> TransferFunction:
    method = QmMethod.parse(method)
    if method is QmMethod.NQM:
        return train_nqm(sim, obs)
    if method is QmMethod.GQM:
        return train_gqm(sim, obs, obs_dry_threshold)
    return train_dgqm(sim, obs, obs_dry_threshold)


def apply(tf: TransferFunction, sim: DailySeries) -> DailySeries:
    """Correct a whole series with an already trained transfer function."""
    if sim.variable is not tf.method.variable:
        raise StructuralError(f"{tf.method.value} cannot correct a {sim.variable.value} series")
    return sim.with_values(tf.apply(sim.values, sim.months))


@dataclass(frozen=True)
class CrossValResult:
    corrected: DailySeries
    blocks: Sequence[tuple[int, int]]
    fold_maps: Sequence[TransferFunction]


def crossval_correct(sim: DailySeries, obs: DailySeries, method: str | QmMethod, k: int = 5,
                     obs_dry_threshold: float = DEFAULT_OBS_DRY_THRESHOLD) -> CrossValResult:
    """k-fold cross-validated correction over the overlap of ``sim`` and ``obs``.

    Each contiguous block is corrected with a map trained on the pooled month
    bags of the remaining blocks; the corrected blocks are concatenated back
    in date order.
    """
    method = QmMethod.parse(method)
    _check_variable(sim, obs, method.variable)
    sim, obs = align_pair(sim, obs)
    blocks = kfold_blocks(len(sim), k)
    n = len(sim)
    out = np.empty(n)
    maps = []
    for start, stop in blocks:
        train_idx = np.r_[np.arange(0, start), np.arange(stop, n)]
        bags = _month_bags(sim, obs, train_idx)
        if method is QmMethod.NQM:
            tf = _train_nqm_bags(*bags)
        elif method is QmMethod.GQM:
            tf = _train_gqm_bags(*bags, obs_dry_threshold)
        else:
            tf = _train_dgqm_bags(*bags, obs_dry_threshold)
        maps.append(tf)
        out[start:stop] = tf.apply(sim.values[start:stop], sim.months[start:stop])
    return CrossValResult(sim.with_values(out), blocks, maps)


__all__ = [
    "CDF_EPS", "SPLIT_QUANTILE", "QmMethod", "NormalMonth", "MonthlyNormalMap", "GammaMonth",
    "MonthlyGammaMap", "DoubleGammaMonth", "MonthlyDoubleGammaMap", "TransferFunction",
    "train_nqm", "apply_nqm", "train_gqm", "apply_gqm", "train_dgqm", "apply_dgqm", "train",
    "apply", "crossval_correct", "CrossValResult", "transfer_function_from_dict", "MIN_WET_VALUES",
]
