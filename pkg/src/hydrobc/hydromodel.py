"""Lumped daily rainfall-runoff model and split-sample calibration.

The model is a soil-moisture bucket feeding a quick and a slow linear
reservoir (five parameters). It is a simple continuous scheme, not a
reimplementation of any particular modelling system.

Each day:

1. effective rain ``pe = p * (s / smax) ** beta`` leaves the soil; the rest
   infiltrates;
2. actual evaporation ``pet * min(s / smax, 1)`` is withdrawn, limited by the
   water in store;
3. any storage above ``smax`` spills into ``pe``;
4. ``pe`` is split ``alpha`` / ``1 - alpha`` between the quick and slow
   reservoirs, each releasing ``v / k`` per day.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .errors import StructuralError, ZeroVarianceError
from .indices import nse, q_exceed
from .timeseries import DailySeries, DateStamp, Variable

logger = logging.getLogger(__name__)

MM_DAY_KM2_PER_M3S = 86.4
DEFAULT_WARMUP = 365

BOUNDS = {
    "smax": (1.0, 1000.0),
    "beta": (0.1, 10.0),
    "alpha": (0.0, 1.0),
    "kq": (1.0, 50.0),
    "ks": (10.0, 500.0),
}
_LOG_SCALED = {"smax", "beta", "kq", "ks"}
_NAMES = tuple(BOUNDS)


@dataclass(frozen=True)
class BucketParams:
    smax: float
    beta: float
    alpha: float
    kq: float
    ks: float

    def __post_init__(self) -> None:
        for name, (lo, hi) in BOUNDS.items():
            v = getattr(self, name)
            if not (math.isfinite(v) and lo <= v <= hi):
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")
        if self.smax <= 1.0 or self.beta <= 0.1:
            raise ValueError("smax and beta are open at their lower bounds")
        if not self.kq < self.ks:
            raise ValueError(f"quick residence time kq={self.kq} must be below ks={self.ks}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BucketParams":
        return cls(**{k: float(d[k]) for k in _NAMES})


@dataclass(frozen=True)
class BucketState:
    s: float
    vq: float = 0.0
    vs: float = 0.0

    @classmethod
    def initial(cls, params: BucketParams) -> "BucketState":
        return cls(params.smax / 2.0, 0.0, 0.0)

    @property
    def total(self) -> float:
        return self.s + self.vq + self.vs


@dataclass(frozen=True)
class CatchmentMeta:
    area: float  # km2
    latitude: float  # radians
    calibration_period: tuple[DateStamp, DateStamp] | None = None
    validation_period: tuple[DateStamp, DateStamp] | None = None
    warmup: int = DEFAULT_WARMUP
    name: str = "catchment"

    def __post_init__(self) -> None:
        if not self.area > 0:
            raise ValueError(f"catchment area must be positive, got {self.area}")
        if self.warmup < 0:
            raise ValueError("warmup must be nonnegative")
        periods = [p for p in (self.calibration_period, self.validation_period) if p is not None]
        if any(p[1] < p[0] for p in periods):
            raise ValueError("period end precedes its start")
        if len(periods) < 2:
            return
        (c0, c1), (v0, v1) = periods
        if not (c1 < v0 or v1 < c0):
            raise ValueError("calibration and validation periods overlap")


@dataclass(frozen=True)
class RunResult:
    q: np.ndarray  # mm/day
    aet: np.ndarray  # mm/day
    initial: BucketState
    final: BucketState


def step(state: BucketState, params: BucketParams, p: float, pet: float) -> tuple[BucketState, float]:
    if p < 0 or pet < 0:
        raise ValueError("precipitation and PET must be nonnegative")
    q, _, final = kernels.bucket_run(np.array([p], float), np.array([pet], float),
                                     params.smax, params.beta, params.alpha, params.kq, params.ks,
                                     state.s, state.vq, state.vs)
    return BucketState(*final), float(q[0])


def run(params: BucketParams, precip, pet, state: BucketState | None = None) -> RunResult:
    """Integrate the model over raw forcing arrays (mm/day)."""
    p = np.ascontiguousarray(precip, dtype=np.float64)
    e = np.ascontiguousarray(pet, dtype=np.float64)
    if p.shape != e.shape:
        raise StructuralError("precipitation and PET forcing differ in length")
    if np.any(~np.isfinite(p)) or np.any(~np.isfinite(e)):
        raise StructuralError("forcing contains missing or non-finite values")
    if np.any(p < 0) or np.any(e < 0):
        raise StructuralError("forcing must be nonnegative")
    state = state or BucketState.initial(params)
    q, aet, final = kernels.bucket_run(p, e, params.smax, params.beta, params.alpha,
                                       params.kq, params.ks, state.s, state.vq, state.vs)
    return RunResult(q, aet, state, BucketState(*final))


def _check_forcing(precip: DailySeries, pet: DailySeries) -> None:
    if precip.variable is not Variable.PRECIP or pet.variable is not Variable.PET:
        raise StructuralError("forcing must be a precipitation and a PET series")
    if not precip.same_axis(pet):
        raise StructuralError("precipitation and PET are not aligned (calendar, start, length)")


def depth_to_discharge(q_mm_day, area_km2: float):
    return np.asarray(q_mm_day) * area_km2 / MM_DAY_KM2_PER_M3S


def simulate(params: BucketParams, precip: DailySeries, pet: DailySeries,
             meta: CatchmentMeta) -> DailySeries:
    """Discharge in m3/s from the day after the warm-up period onwards."""
    _check_forcing(precip, pet)
    if meta.warmup >= len(precip):
        raise StructuralError(f"warm-up of {meta.warmup} days leaves no simulated flow")
    res = run(params, precip.values, pet.values)
    flow = depth_to_discharge(res.q[meta.warmup:], meta.area)
    return DailySeries(Variable.FLOW, precip.calendar, precip.date_at(meta.warmup), flow)


# -- calibration ------------------------------------------------------------------

def params_from_unit(z) -> BucketParams | None:
    """Map a point of the unit cube to parameters; None if ``kq >= ks``."""
    vals = {}
    for zi, name in zip(np.clip(z, 0.0, 1.0), _NAMES):
        lo, hi = BOUNDS[name]
        if name in _LOG_SCALED:
            v = math.exp(math.log(lo) + float(zi) * (math.log(hi) - math.log(lo)))
        else:
            v = lo + float(zi) * (hi - lo)
        vals[name] = min(max(v, lo), hi)
    # smax and beta are open at their lower bounds
    vals["smax"] = max(vals["smax"], 1.0 + 1e-9)
    vals["beta"] = max(vals["beta"], 0.1 + 1e-9)
    if vals["kq"] >= vals["ks"]:
        return None
    return BucketParams(**vals)


@dataclass(frozen=True)
class PeriodScores:
    nse: float
    q10_bias: float
    q10_bias_pct: float
    q95_bias: float
    q95_bias_pct: float


@dataclass
class CalibrationReport:
    params: BucketParams
    evaluations: int
    calibration: PeriodScores
    validation: PeriodScores
    history: list[float] = field(default_factory=list, repr=False)  # best NSE after each evaluation

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "evaluations": self.evaluations,
                "calibration": asdict(self.calibration), "validation": asdict(self.validation)}

    def table_rows(self) -> list[list]:
        rows = []
        for name, sc in (("calibration", self.calibration), ("validation", self.validation)):
            rows.append([name, sc.nse, sc.q10_bias, sc.q10_bias_pct, sc.q95_bias, sc.q95_bias_pct])
        return rows


def period_scores(sim: np.ndarray, obs: np.ndarray) -> PeriodScores:
    """Daily NSE plus Q10 and Q95 biases (absolute and percent)."""
    ok = ~(np.isnan(sim) | np.isnan(obs))
    s, o = sim[ok], obs[ok]
    q10s, q10o = float(q_exceed(s, 0.10)), float(q_exceed(o, 0.10))
    q95s, q95o = float(q_exceed(s, 0.95)), float(q_exceed(o, 0.95))

    def pct(a, b):
        return 100.0 * (a - b) / b if b != 0 else float("nan")
    return PeriodScores(nse(s, o), q10s - q10o, pct(q10s, q10o), q95s - q95o, pct(q95s, q95o))


class _BudgetExhausted(Exception):
    pass


class _Objective:
    """Counts evaluations, tracks the best point and stops at the budget."""

    def __init__(self, fn: Callable[[np.ndarray], float], budget: int):
        self.fn = fn
        self.budget = budget
        self.count = 0
        self.best_f = math.inf
        self.best_z: np.ndarray | None = None
        self.history: list[float] = []

    def record(self, z: np.ndarray, f: float) -> None:
        self.count += 1
        if f < self.best_f:
            self.best_f = f
            self.best_z = np.array(z, dtype=np.float64)
        self.history.append(1.0 - self.best_f)

    def __call__(self, z) -> float:
        if self.count >= self.budget:
            raise _BudgetExhausted
        z = np.clip(np.asarray(z, dtype=np.float64), 0.0, 1.0)
        f = self.fn(z)
        self.record(z, f)
        return f


def calibrate(precip: DailySeries, pet: DailySeries, obs_flow: DailySeries, meta: CatchmentMeta,
              budget: int = 5000, seed: int = 0, jobs: int = 1,
              n_random: int = 200, local_maxfev: int = 600) -> tuple[BucketParams, CalibrationReport]:
    """Fit the five parameters to gauged flow by maximising daily NSE.

    Search starts with ``n_random`` seeded random candidates (each drawn from
    its own child seed, so results do not depend on ``jobs``), then runs
    Nelder-Mead restarts from the best points found until the evaluation
    budget is used. The evaluation sequence for a smaller budget is a prefix
    of the sequence for a larger one, so more budget never scores worse.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    if meta.calibration_period is None or meta.validation_period is None:
        raise StructuralError("calibration needs both a calibration and a validation period")
    _check_forcing(precip, pet)
    if obs_flow.variable is not Variable.FLOW or obs_flow.calendar is not precip.calendar:
        raise StructuralError("observed flow must be a flow series on the forcing calendar")

    sim_start = precip.date_at(meta.warmup) if meta.warmup < len(precip) else None
    if sim_start is None:
        raise StructuralError("warm-up consumes the whole forcing record")

    def window(period) -> tuple[np.ndarray, np.ndarray]:
        first, last = period
        i0 = precip.index_of(first)
        i1 = precip.index_of(last)
        if i0 < 0 or i1 >= len(precip):
            raise StructuralError(f"period {first}..{last} is not covered by the forcing")
        idx = np.arange(max(i0, meta.warmup), i1 + 1)
        if idx.size == 0:
            raise StructuralError(f"period {first}..{last} lies inside the warm-up")
        obs = np.full(idx.size, np.nan)
        j = idx + precip.start_ordinal - obs_flow.start_ordinal
        inside = (j >= 0) & (j < len(obs_flow))
        obs[inside] = obs_flow.values[j[inside]]
        if np.mean(np.isnan(obs)) > 0.5:
            raise StructuralError(f"observed flow is missing on more than half of {first}..{last}")
        return idx, obs

    cal_idx, cal_obs = window(meta.calibration_period)
    val_idx, val_obs = window(meta.validation_period)
    ok = ~np.isnan(cal_obs)
    cal_idx_ok, cal_obs_ok = cal_idx[ok], cal_obs[ok]
    if np.ptp(cal_obs_ok) == 0:
        raise ZeroVarianceError("observed calibration flow has zero variance")
    denom = float(np.sum((cal_obs_ok - cal_obs_ok.mean()) ** 2))
    p_arr = np.ascontiguousarray(precip.values)
    e_arr = np.ascontiguousarray(pet.values)
    if np.any(~np.isfinite(p_arr)) or np.any(~np.isfinite(e_arr)):
        raise StructuralError("forcing contains missing values")

    def flow_of(params: BucketParams) -> np.ndarray:
        q, _, _ = kernels.bucket_run(p_arr, e_arr, params.smax, params.beta, params.alpha,
                                     params.kq, params.ks, params.smax / 2.0, 0.0, 0.0)
        return q * (meta.area / MM_DAY_KM2_PER_M3S)

    def loss(z: np.ndarray) -> float:
        params = params_from_unit(z)
        if params is None:
            return 10.0  # kq >= ks: infeasible
        q = flow_of(params)[cal_idx_ok]
        return float(np.sum((q - cal_obs_ok) ** 2)) / denom  # 1 - NSE

    obj = _Objective(loss, budget)

    n_random = min(n_random, budget)
    children = np.random.SeedSequence(seed).spawn(n_random)
    candidates = [np.random.default_rng(c).random(len(_NAMES)) for c in children]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            losses = list(pool.map(loss, candidates))
    else:
        losses = [loss(z) for z in candidates]
    for z, f in zip(candidates, losses):
        obj.record(z, f)

    order = np.argsort(np.asarray(losses), kind="stable")
    starts = [candidates[i] for i in order[:5]]
    scale = 0.15
    try:
        while obj.count < budget:
            x0 = starts.pop(0) if starts else obj.best_z
            simplex = np.vstack([x0] + [np.clip(x0 + scale * np.eye(len(x0))[i] * (1 if x0[i] < 0.5 else -1), 0, 1)
                                        for i in range(len(x0))])
            minimize(obj, x0, method="Nelder-Mead",
                     options={"maxfev": local_maxfev, "initial_simplex": simplex,
                              "xatol": 1e-7, "fatol": 1e-10})
            if not starts:
                scale = max(scale * 0.5, 0.01)
    except _BudgetExhausted:
        pass

    best = params_from_unit(obj.best_z)
    q_all = flow_of(best)
    report = CalibrationReport(
        best, obj.count,
        period_scores(q_all[cal_idx], cal_obs),
        period_scores(q_all[val_idx], val_obs),
        obj.history,
    )
    logger.info("calibration finished after %d evaluations: NSE %.4f (calibration), %.4f (validation)",
                obj.count, report.calibration.nse, report.validation.nse)
    return best, report
