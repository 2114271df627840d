"""Experiment orchestration: correction, PET, hydrology, indices, ranks.

An experiment is a set of catchments, each with observed precipitation,
temperature and (unless parameters are given) gauged flow, and an ensemble
of climate models with forcing for every catchment. :func:`run_evaluation`
calibrates the hydrological model once per catchment on observed forcing,
then evaluates every (catchment, model, correction) cell against the
observations. Flow is always compared with the observation-driven
simulation, never with the gauge, so that hydrological-model error drops
out of the comparison.

Cells are independent and may run in a process pool; results are reduced in
configuration order so reports do not depend on ``jobs``.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import io, qmap
from .distfit import DEFAULT_OBS_DRY_THRESHOLD, empirical_quantile
from .errors import ConfigError, HydroBCError, StructuralError
from .hydromodel import BucketParams, CalibrationReport, CatchmentMeta, calibrate, simulate
from .indices import (
    PERCENTILES,
    RANKED_INDICES,
    IndexValue,
    Measure,
    average_ranks,
    fdc,
    index_report,
    normalize_mse,
    percentile_bias_curve,
)
from .pet import SiteGeometry, oudin_pet
from .synth import random_bias, synth_ensemble, uk_like_spec
from .timeseries import CellSet, DailySeries, DateStamp, Variable, align_pair, catchment_average

logger = logging.getLogger(__name__)

CORRECTIONS = ("raw", "gqm", "dgqm")
REPORT_HEADER = ["catchment", "model", "resolution", "correction", "index", "measure", "sim", "obs", "value"]
CURVE_HEADER = ["catchment", "model", "resolution", "correction", "curve", "x", "y"]
ENVELOPE_HEADER = ["catchment", "correction", "curve", "resolution", "x", "min", "max"]
VARIABLES = (Variable.PRECIP, Variable.TEMP, Variable.FLOW)


# -- configuration -----------------------------------------------------------------

@dataclass(frozen=True)
class Forcing:
    """A catchment forcing file, or grid cells to be area-averaged."""

    cells: tuple[tuple[Path, float], ...]

    @classmethod
    def parse(cls, entry, base: Path, where: str) -> "Forcing":
        if isinstance(entry, str):
            return cls(((base / entry, 1.0),))
        if isinstance(entry, dict) and isinstance(entry.get("cells"), list) and entry["cells"]:
            cells = []
            for c in entry["cells"]:
                if isinstance(c, str):
                    cells.append((base / c, 1.0))
                elif isinstance(c, dict) and "path" in c:
                    cells.append((base / c["path"], float(c.get("weight", 1.0))))
                else:
                    raise ConfigError(f"{where}: a cell is a path or {{path, weight}}")
            return cls(tuple(cells))
        raise ConfigError(f"{where}: expected a file path or {{\"cells\": [...]}}")

    def load(self, variable: Variable, calendar: str | None = None) -> DailySeries:
        series = [(io.read_series(p, variable, calendar), w) for p, w in self.cells]
        return catchment_average(CellSet(series))

    def to_json(self, base: Path):
        rel = [(os.path.relpath(p, base), w) for p, w in self.cells]
        if len(rel) == 1 and rel[0][1] == 1.0:
            return rel[0][0]
        return {"cells": [{"path": p, "weight": w} for p, w in rel]}


@dataclass(frozen=True)
class CatchmentConfig:
    meta: CatchmentMeta
    latitude_deg: float
    precip: Forcing
    temp: Forcing
    flow: Forcing | None = None
    params: BucketParams | None = None
    calendar: str | None = None

    @property
    def name(self) -> str:
        return self.meta.name


@dataclass(frozen=True)
class ModelConfig:
    name: str
    resolution: str
    forcing: Mapping[str, Mapping[str, Forcing]]  # catchment -> {"precip", "temp"}
    calendar: str | None = None

    @property
    def label(self) -> str:
        return f"{self.name}@{self.resolution}"


def _period(value, where: str) -> tuple[DateStamp, DateStamp]:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(f"{where}: a period is [first, last]")
    try:
        return DateStamp.parse(value[0]), DateStamp.parse(value[1])
    except (ValueError, TypeError, AttributeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _require(d: Mapping, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing '{key}'")
    return d[key]


@dataclass(frozen=True)
class ExperimentConfig:
    catchments: tuple[CatchmentConfig, ...]
    models: tuple[ModelConfig, ...]
    corrections: tuple[str, ...] = CORRECTIONS
    k: int = 5
    seed: int = 0
    out_dir: Path = Path("results")
    calibration_budget: int = 5000
    obs_dry_threshold: float = DEFAULT_OBS_DRY_THRESHOLD
    rank_absolute: bool = True

    def __post_init__(self) -> None:
        if not self.catchments:
            raise ConfigError("experiment has no catchments")
        if not self.models:
            raise ConfigError("experiment has no models")
        labels = [m.label for m in self.models]
        if len(set(labels)) != len(labels):
            raise ConfigError("model (name, resolution) pairs must be unique")
        names = [c.name for c in self.catchments]
        if len(set(names)) != len(names):
            raise ConfigError("catchment names must be unique")
        if self.k < 2:
            raise ConfigError(f"cross-validation needs k >= 2, got {self.k}")
        bad = [c for c in self.corrections if c not in CORRECTIONS]
        if bad or not self.corrections:
            raise ConfigError(f"corrections must be a non-empty subset of {list(CORRECTIONS)}")
        for m in self.models:
            for c in names:
                f = m.forcing.get(c)
                if f is None or "precip" not in f or "temp" not in f:
                    raise ConfigError(f"model {m.label}: no precip/temp forcing for catchment {c}")

    @classmethod
    def from_dict(cls, d: Mapping, base: str | Path = ".") -> "ExperimentConfig":
        base = Path(base)
        if not isinstance(d, Mapping):
            raise ConfigError("experiment config must be a JSON object")
        catchments = []
        for i, c in enumerate(_require(d, "catchments", "config")):
            where = f"catchments[{i}]"
            name = str(_require(c, "name", where))
            obs = _require(c, "obs", where)
            lat = float(_require(c, "latitude_deg", where))
            try:
                meta = CatchmentMeta(
                    area=float(_require(c, "area_km2", where)),
                    latitude=math.radians(lat),
                    calibration_period=_period(_require(c, "calibration_period", where), where),
                    validation_period=_period(_require(c, "validation_period", where), where),
                    warmup=int(c.get("warmup_days", 365)),
                    name=name,
                )
                params = BucketParams.from_dict(c["params"]) if c.get("params") else None
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"{where}: {exc}") from None
            flow = Forcing.parse(obs["flow"], base, where) if obs.get("flow") else None
            if flow is None and params is None:
                raise ConfigError(f"{where}: needs observed flow or fixed params")
            catchments.append(CatchmentConfig(
                meta, lat,
                Forcing.parse(_require(obs, "precip", where), base, where),
                Forcing.parse(_require(obs, "temp", where), base, where),
                flow, params, c.get("calendar")))
        models = []
        for i, m in enumerate(_require(d, "models", "config")):
            where = f"models[{i}]"
            forcing = {}
            for cname, entry in _require(m, "forcing", where).items():
                forcing[cname] = {v: Forcing.parse(entry[v], base, f"{where}.{cname}.{v}")
                                  for v in ("precip", "temp") if v in entry}
            models.append(ModelConfig(str(_require(m, "name", where)), str(m.get("resolution", "-")),
                                      forcing, m.get("calendar")))
        out = Path(d.get("out", "results"))
        try:
            return cls(
                tuple(catchments), tuple(models),
                tuple(str(x).lower() for x in d.get("corrections", CORRECTIONS)),
                int(d.get("k", 5)), int(d.get("seed", 0)),
                out if out.is_absolute() else base / out,
                int(d.get("calibration_budget", 5000)),
                float(d.get("obs_dry_threshold", DEFAULT_OBS_DRY_THRESHOLD)),
                bool(d.get("rank_absolute", True)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = io.read_json(path)
        except ValueError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(d, path.parent)


# -- ranking -----------------------------------------------------------------------

@dataclass(frozen=True)
class RankTable:
    """Per-index ranks (1 = best), average scores and final ranks."""

    models: tuple[tuple[str, str], ...]  # (name, resolution)
    indices: tuple[str, ...]
    ranks: Mapping[str, tuple[float, ...]]  # index -> rank per model
    flagged: frozenset[tuple[str, int]]  # (index, model position) with a missing value
    average: tuple[float, ...]
    final_rank: tuple[int, ...]
    best_resolution: tuple[bool, ...]

    def header(self) -> list[str]:
        return ["model", "resolution", *self.indices, "average_score", "final_rank", "best_resolution"]

    def rows(self) -> list[list]:
        out = []
        for i, (name, res) in enumerate(self.models):
            cells = []
            for idx in self.indices:
                r = self.ranks[idx][i]
                cells.append(f"{r:g}*" if (idx, i) in self.flagged else f"{r:g}")
            out.append([name, res, *cells, self.average[i], self.final_rank[i],
                        "*" if self.best_resolution[i] else ""])
        order = sorted(range(len(self.models)), key=lambda i: self.final_rank[i])
        return [out[i] for i in order]


def _score(rows: Sequence[IndexValue], absolute: bool) -> float:
    """One number per (model, index); monthly rows are averaged."""
    scores = []
    for r in rows:
        if not math.isfinite(r.value) or r.flagged:
            return math.nan
        if absolute or r.measure in (Measure.INDEX, Measure.MSE_RATIO):
            scores.append(r.badness)
        else:
            scores.append(r.value)
    return float(np.mean(scores)) if scores else math.nan


def rank_models(reports: Mapping[tuple[str, str], Sequence[IndexValue]],
                indices: Sequence[str], absolute: bool = True) -> RankTable:
    """Rank models on each index and combine into an average score.

    ``reports`` maps (name, resolution) to the rows of one variable. Rows
    sharing a base id (the twelve monthly rows of a monthly index) are
    scored by their mean badness. Missing or non-finite scores rank last,
    sharing the tail ranks when several are missing, and are flagged.
    With ``absolute=False`` bias and percentage-error rows are ordered by
    their signed value instead.
    """
    models = tuple(reports)
    if not models:
        raise StructuralError("nothing to rank")
    n = len(models)
    ranks: dict[str, tuple[float, ...]] = {}
    flagged = set()
    for idx in indices:
        scores = np.array([_score([r for r in reports[m] if r.base_id == idx], absolute) for m in models])
        missing = ~np.isfinite(scores)
        col = np.empty(n)
        good = np.flatnonzero(~missing)
        col[good] = average_ranks(scores[good])
        if missing.any():
            col[missing] = good.size + 0.5 * (missing.sum() + 1)  # mean of the tail ranks
            flagged.update((idx, int(i)) for i in np.flatnonzero(missing))
        ranks[idx] = tuple(float(x) for x in col)
    if indices:
        average = tuple(float(np.mean([ranks[idx][i] for idx in indices])) for i in range(n))
    else:
        average = tuple(1.0 for _ in range(n))
    order = sorted(range(n), key=lambda i: (average[i], models[i][0], models[i][1]))
    final = [0] * n
    for pos, i in enumerate(order, start=1):
        final[i] = pos
    best = [False] * n
    by_name: dict[str, list[int]] = {}
    for i, (name, _) in enumerate(models):
        by_name.setdefault(name, []).append(i)
    for members in by_name.values():
        if len(members) > 1:
            best[min(members, key=lambda i: (average[i], models[i][1]))] = True
    return RankTable(models, tuple(indices), ranks, frozenset(flagged), average, tuple(final), tuple(best))


# -- envelopes ---------------------------------------------------------------------

@dataclass(frozen=True)
class Curve:
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class EnsembleEnvelope:
    x: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def ensemble_envelope(groups: Mapping[str, Sequence[Curve]]) -> dict[str, EnsembleEnvelope]:
    """Pointwise min and max over the curves of each group."""
    out = {}
    for key, curves in groups.items():
        if not curves:
            raise StructuralError(f"group {key!r} has no curves")
        x = np.asarray(curves[0].x, dtype=np.float64)
        for c in curves[1:]:
            if np.shape(c.x) != x.shape or not np.array_equal(np.asarray(c.x, dtype=np.float64), x):
                raise StructuralError(f"group {key!r}: curves do not share an abscissa")
        ys = np.vstack([np.asarray(c.y, dtype=np.float64) for c in curves])
        out[key] = EnsembleEnvelope(x, ys.min(axis=0), ys.max(axis=0))
    return out


# -- evaluation --------------------------------------------------------------------

@dataclass(frozen=True)
class ObservedCatchment:
    config: CatchmentConfig
    precip: DailySeries
    temp: DailySeries
    flow: DailySeries  # observation-driven simulation
    params: BucketParams
    calibration: CalibrationReport | None


@dataclass(frozen=True)
class CellResult:
    catchment: str
    model: ModelConfig
    correction: str
    rows: Mapping[Variable, list[IndexValue]] = field(default_factory=dict)
    curves: Mapping[str, Curve] = field(default_factory=dict)
    error: str | None = None
    code: str | None = None


@dataclass
class EvaluationResult:
    config: ExperimentConfig
    catchments: list[ObservedCatchment]
    cells: list[CellResult]
    ranks: dict[tuple[str, Variable], RankTable]
    envelopes: dict[tuple[str, str, str, str], EnsembleEnvelope]  # (catchment, correction, curve, resolution)

    @property
    def failures(self) -> list[CellResult]:
        return [c for c in self.cells if c.error is not None]

    def rows(self, variable: Variable):
        for cell in self.cells:
            for r in cell.rows.get(variable, []):
                yield [cell.catchment, cell.model.name, cell.model.resolution, cell.correction,
                       r.id, r.measure.value, r.sim_value, r.obs_value, r.value]

    def index(self, catchment: str, model: str, resolution: str, correction: str,
              variable: Variable, index_id: str) -> IndexValue:
        for cell in self.cells:
            if (cell.catchment, cell.model.name, cell.model.resolution, cell.correction) == \
                    (catchment, model, resolution, correction):
                for r in cell.rows.get(variable, []):
                    if r.id == index_id:
                        return r
        raise KeyError((catchment, model, resolution, correction, variable.value, index_id))


def _prepare_catchment(cfg: CatchmentConfig, budget: int, seed: int, jobs: int) -> ObservedCatchment:
    precip = cfg.precip.load(Variable.PRECIP, cfg.calendar)
    temp = cfg.temp.load(Variable.TEMP, cfg.calendar)
    precip, temp = align_pair(precip, temp)
    pet = oudin_pet(temp, SiteGeometry(cfg.meta.latitude))
    report = None
    params = cfg.params
    if params is None:
        flow = cfg.flow.load(Variable.FLOW, cfg.calendar)
        params, report = calibrate(precip, pet, flow, cfg.meta, budget=budget, seed=seed, jobs=jobs)
    sim_flow = simulate(params, precip, pet, cfg.meta)
    return ObservedCatchment(cfg, precip, temp, sim_flow, params, report)


def _evaluate_cell(obs: ObservedCatchment, model: ModelConfig, correction: str,
                   config: ExperimentConfig) -> CellResult:
    name = obs.config.name
    try:
        forcing = model.forcing[name]
        p = forcing["precip"].load(Variable.PRECIP, model.calendar)
        t = forcing["temp"].load(Variable.TEMP, model.calendar)
        p, t = align_pair(p, t)
        p, obs_p = align_pair(p, obs.precip)
        t, obs_t = align_pair(t, obs.temp)
        if correction != "raw":
            p = qmap.crossval_correct(p, obs_p, correction, config.k, config.obs_dry_threshold).corrected
            t = qmap.crossval_correct(t, obs_t, "nqm", config.k).corrected
        pet = oudin_pet(t, SiteGeometry(obs.config.meta.latitude))
        flow = simulate(obs.params, p, pet, obs.config.meta)
        rows = {
            Variable.PRECIP: index_report(p, obs_p),
            Variable.TEMP: index_report(t, obs_t),
            Variable.FLOW: index_report(flow, obs.flow),
        }
        grid = PERCENTILES.astype(np.float64)
        pv = p.values[~np.isnan(p.values)]
        flow_a, obs_flow_a = align_pair(flow, obs.flow)
        fc, fo = fdc(flow_a), fdc(obs_flow_a)
        curves = {
            "precip_percentiles": Curve(grid, np.array([empirical_quantile(pv, q / 100) for q in PERCENTILES])),
            "precip_percentile_bias": Curve(grid, percentile_bias_curve(p, obs_p)),
            "temp_percentile_bias": Curve(grid, percentile_bias_curve(t, obs_t)),
            "flow_duration": Curve(fc.exceedance, fc.flows),
            "flow_duration_bias": Curve(fc.exceedance, fc.flows - fo.flows),
        }
        return CellResult(name, model, correction, rows, curves)
    except HydroBCError as exc:
        logger.warning("cell %s/%s/%s failed: %s", name, model.label, correction, exc)
        return CellResult(name, model, correction, error=str(exc), code=exc.code)
    except (OSError, ValueError) as exc:
        logger.warning("cell %s/%s/%s failed: %s", name, model.label, correction, exc)
        return CellResult(name, model, correction, error=str(exc), code="E_INPUT")


def _normalize_cells(cells: list[CellResult]) -> list[CellResult]:
    """Relative MSE shares one denominator per (catchment, variable).

    Raw and corrected runs are pooled, so ratios are comparable across
    correction variants.
    """
    out = list(cells)
    groups: dict[tuple[str, Variable], list[int]] = {}
    for i, c in enumerate(cells):
        for v in c.rows:
            groups.setdefault((c.catchment, v), []).append(i)
    for (_, v), members in groups.items():
        normed = normalize_mse([out[i].rows[v] for i in members])
        for i, rows in zip(members, normed):
            new_rows = dict(out[i].rows)
            new_rows[v] = rows
            c = out[i]
            out[i] = CellResult(c.catchment, c.model, c.correction, new_rows, c.curves, c.error, c.code)
    return out


def run_evaluation(config: ExperimentConfig, jobs: int = 1, write: bool = True) -> EvaluationResult:
    """Evaluate every catchment, model and correction variant.

    Failed cells are recorded with their error and skipped; catchment-level
    failures (unreadable observations, calibration errors) propagate.
    """
    jobs = max(int(jobs), 1)
    observed = [_prepare_catchment(c, config.calibration_budget, config.seed, jobs)
                for c in config.catchments]
    tasks = [(obs, m, corr) for obs in observed for m in config.models for corr in config.corrections]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_evaluate_cell, *zip(*tasks), [config] * len(tasks)))
    else:
        cells = [_evaluate_cell(*a, config) for a in tasks]
    cells = _normalize_cells(cells)

    ranks = {}
    for obs in observed:
        raw = [c for c in cells if c.catchment == obs.config.name and c.correction == "raw" and c.error is None]
        if not raw:
            continue
        for v in VARIABLES:
            reps = {(c.model.name, c.model.resolution): c.rows[v] for c in raw}
            ranks[(obs.config.name, v)] = rank_models(reps, RANKED_INDICES[v], config.rank_absolute)

    groups: dict[tuple[str, str, str, str], list[Curve]] = {}
    for c in cells:
        for curve_name, curve in c.curves.items():
            groups.setdefault((c.catchment, c.correction, curve_name, c.model.resolution), []).append(curve)
    envelopes = ensemble_envelope(groups)

    result = EvaluationResult(config, observed, cells, ranks, envelopes)
    if write:
        write_outputs(result, config.out_dir)
    return result


# -- outputs -----------------------------------------------------------------------

def report_path(out_dir: Path, variable: Variable) -> Path:
    return Path(out_dir) / f"report_{variable.value}.csv"


def write_outputs(result: EvaluationResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for v in VARIABLES:
        io.write_rows(report_path(out, v), REPORT_HEADER, result.rows(v))
    curve_rows = []
    for c in result.cells:
        for name, curve in c.curves.items():
            for x, y in zip(curve.x, curve.y):
                curve_rows.append([c.catchment, c.model.name, c.model.resolution, c.correction,
                                   name, float(x), float(y)])
    io.write_rows(out / "curves.csv", CURVE_HEADER, curve_rows)
    env_rows = []
    for (catchment, corr, curve, res), env in result.envelopes.items():
        for x, lo, hi in zip(env.x, env.lower, env.upper):
            env_rows.append([catchment, corr, curve, res, float(x), float(lo), float(hi)])
    io.write_rows(out / "envelopes.csv", ENVELOPE_HEADER, env_rows)
    for (catchment, v), table in result.ranks.items():
        io.write_rows(out / "ranks" / f"{catchment}_{v.value}.csv", table.header(), table.rows())
    calib = {}
    for obs in result.catchments:
        entry = {"params": obs.params.to_dict()}
        if obs.calibration is not None:
            entry.update(obs.calibration.to_dict())
        calib[obs.config.name] = entry
    io.write_json(out / "calibration.json", calib)
    reports = {}
    for c in result.cells:
        if c.error is not None:
            continue
        key = f"{c.catchment}/{c.model.name}/{c.model.resolution}/{c.correction}"
        reports[key] = {v.value: [{"index": r.id, "measure": r.measure.value, "sim": _json_num(r.sim_value),
                                   "obs": _json_num(r.obs_value), "value": _json_num(r.value),
                                   "units": r.units} for r in rows]
                        for v, rows in c.rows.items()}
    io.write_json(out / "reports.json", reports)
    io.write_json(out / "failures.json", [
        {"catchment": c.catchment, "model": c.model.name, "resolution": c.model.resolution,
         "correction": c.correction, "code": c.code, "error": c.error}
        for c in result.failures])


def _json_num(x: float):
    return float(x) if math.isfinite(x) else None


def read_reports(report_dir: str | Path, variable: Variable, correction: str = "raw",
                 catchment: str | None = None) -> dict[str, dict[tuple[str, str], list[IndexValue]]]:
    """Rows of a written report grouped by catchment and (model, resolution)."""
    path = report_path(Path(report_dir), variable)
    if not path.exists():
        raise StructuralError(f"{path}: no report for {variable.value}")
    out: dict[str, dict[tuple[str, str], list[IndexValue]]] = {}
    for row in io.read_rows(path):
        missing = [h for h in REPORT_HEADER if h not in row]
        if missing:
            raise StructuralError(f"{path}: missing columns {missing}")
        if row["correction"] != correction or (catchment is not None and row["catchment"] != catchment):
            continue

        def num(s: str) -> float:
            return float(s) if s != "" else math.nan
        value = num(row["value"])
        iv = IndexValue(row["index"], Measure(row["measure"]), num(row["sim"]), num(row["obs"]),
                        value, "", not math.isfinite(value))
        out.setdefault(row["catchment"], {}).setdefault((row["model"], row["resolution"]), []).append(iv)
    return out


# -- synthetic experiment ----------------------------------------------------------

TRUE_PARAMS = BucketParams(smax=250.0, beta=2.0, alpha=0.4, kq=3.0, ks=60.0)


def write_synthetic_experiment(out_dir: str | Path, n_catchments: int = 4, n_names: int = 5,
                               resolutions: Sequence[str] = ("0.11", "0.44"), years: int = 20,
                               seed: int = 0, flow_noise: float = 0.05,
                               corrections: Sequence[str] = CORRECTIONS,
                               calibration_budget: int = 2000) -> Path:
    """Write observations, an ensemble of biased model series and a config.

    Each catchment gets its own climate and area. Gauged flow is the bucket
    model driven by observed forcing with known parameters, perturbed by
    multiplicative Gaussian noise. Every (name, resolution) member carries
    its own random bias. Returns the path of the config file.
    """
    if years < 4:
        raise ConfigError("a synthetic experiment needs at least four years")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = DateStamp(1981, 1, 1)
    members = [(f"RCM{i + 1:02d}", res) for i in range(n_names) for res in resolutions]
    catchments = []
    forcing: dict[tuple[str, str], dict] = {m: {} for m in members}
    for cseq in np.random.SeedSequence(seed).spawn(n_catchments):
        rng = np.random.default_rng(cseq)
        cname = f"C{len(catchments) + 1:02d}"
        lat = float(rng.uniform(50.5, 55.5))
        area = float(rng.uniform(50.0, 500.0))
        spec = uk_like_spec(precip_scale=float(rng.uniform(0.8, 1.3)),
                            temp_mean=float(rng.uniform(8.0, 10.5)), years=years, start=start)
        biases = [random_bias(rng) for _ in members]
        obs_p, obs_t, sims = synth_ensemble(spec, biases, int(rng.integers(2**31)))
        for (mname, res), (sp, st) in zip(members, sims):
            d = Path("models") / f"{mname}_{res}"
            io.write_series(sp, out / d / f"{cname}_precip.csv")
            io.write_series(st, out / d / f"{cname}_temp.csv")
            forcing[(mname, res)][cname] = {"precip": str(d / f"{cname}_precip.csv"),
                                            "temp": str(d / f"{cname}_temp.csv")}
        end = DateStamp(start.year + years - 1, 12, 31)
        half = years // 2  # first year is warm-up; calibrate on the rest of the first half
        meta = CatchmentMeta(area, math.radians(lat),
                             (DateStamp(start.year + 1, 1, 1), DateStamp(start.year + half - 1, 12, 31)),
                             (DateStamp(start.year + half, 1, 1), end), 365, cname)
        pet = oudin_pet(obs_t, SiteGeometry(meta.latitude))
        true_flow = simulate(TRUE_PARAMS, obs_p, pet, meta)
        noise = 1.0 + flow_noise * rng.standard_normal(len(true_flow))
        gauge = true_flow.with_values(np.maximum(true_flow.values * noise, 0.0))
        paths = {v: f"obs/{cname}_{v}.csv" for v in ("precip", "temp", "flow")}
        io.write_series(obs_p, out / paths["precip"])
        io.write_series(obs_t, out / paths["temp"])
        io.write_series(gauge, out / paths["flow"])
        catchments.append({
            "name": cname, "area_km2": area, "latitude_deg": lat, "warmup_days": 365,
            "calibration_period": [str(d) for d in meta.calibration_period],
            "validation_period": [str(d) for d in meta.validation_period],
            "obs": paths,
        })
    config = {
        "seed": seed, "k": 5, "out": "results", "corrections": list(corrections),
        "calibration_budget": calibration_budget, "catchments": catchments,
        "models": [{"name": n, "resolution": r, "forcing": forcing[(n, r)]} for n, r in members],
    }
    return io.write_json(out / "experiment.json", config)
