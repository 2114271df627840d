"""``hydrobc`` command-line interface.

Each subcommand runs one stage and reads and writes plain CSV/JSON, so
stages compose through files: ``correct`` output feeds ``pet`` and
``simulate``, ``evaluate`` output feeds ``rank``.

Exit status is 0 on success, 2 for bad input (unreadable or invalid files,
bad flags, invalid configuration) and 1 for internal failures, including an
evaluation with failed cells. Errors go to stderr as
``hydrobc: error [CODE]: message``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, io, qmap
from .distfit import DEFAULT_OBS_DRY_THRESHOLD, fit_gamma_mle, fit_normal
from .errors import ConfigError, HydroBCError
from .hydromodel import DEFAULT_WARMUP, BucketParams, CatchmentMeta, calibrate, simulate
from .indices import index_report, normalize_mse
from .pet import SiteGeometry, oudin_pet
from .pipeline import (
    REPORT_HEADER,
    RANKED_INDICES,
    ExperimentConfig,
    read_reports,
    rank_models,
    run_evaluation,
    write_synthetic_experiment,
)
from .synth import SimBias, synth_generate, uk_like_spec
from .timeseries import Calendar, DateStamp, Variable, group_by_month

logger = logging.getLogger("hydrobc")


class _Failure(Exception):
    """Internal failure with a code, mapped to exit status 1."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _default_jobs() -> int:
    raw = os.environ.get("HYDROBC_JOBS", "")
    try:
        return max(int(raw), 1) if raw else 1
    except ValueError:
        return 1


def _period(text: str) -> tuple[DateStamp, DateStamp]:
    try:
        a, b = text.split(":")
        return DateStamp.parse(a), DateStamp.parse(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FIRST:LAST ISO dates, got {text!r}") from None


def _out_path(args, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


# -- subcommands -------------------------------------------------------------------

def cmd_synth(args) -> int:
    out = _out_path(args, "synth")
    if args.experiment:
        cfg = write_synthetic_experiment(out, n_catchments=args.catchments, n_names=args.models,
                                         years=args.years, seed=args.seed,
                                         calibration_budget=args.budget)
        print(cfg)
        return 0
    bias = SimBias(temp_shift=args.temp_shift, wet_scale_factor=args.wet_scale,
                   drizzle_surplus=args.drizzle, tail_inflation=args.tail_inflation)
    spec = uk_like_spec(bias=bias, years=args.years, calendar=Calendar.parse(args.calendar or "gregorian"),
                        correlation=args.correlation)
    pair = synth_generate(spec, args.seed)
    for name, s in (("obs_precip", pair.obs_precip), ("obs_temp", pair.obs_temp),
                    ("sim_precip", pair.sim_precip), ("sim_temp", pair.sim_temp)):
        io.write_series(s, out / f"{name}.csv")
    print(out)
    return 0


def cmd_fit(args) -> int:
    s = io.read_series(args.input, args.variable, args.calendar)
    dist = args.dist or ("gamma" if s.variable is Variable.PRECIP else "normal")
    months = []
    for m, bag in enumerate(group_by_month(s), start=1):
        bag = bag[~np.isnan(bag)]
        if dist == "gamma":
            wet = bag[bag >= args.threshold]
            g = fit_gamma_mle(wet, month=m)
            months.append({"month": m, "shape": g.shape, "scale": g.scale, "n_wet": int(wet.size),
                           "dry_fraction": float(np.mean(bag < args.threshold)) if bag.size else math.nan})
        else:
            nrm = fit_normal(bag)
            months.append({"month": m, "mean": nrm.mean, "sd": nrm.sd, "n": int(bag.size)})
    payload = {"distribution": dist, "variable": s.variable.value, "months": months}
    if dist == "gamma":
        payload["threshold"] = args.threshold
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_correct(args) -> int:
    method = qmap.QmMethod.parse(args.method)
    sim = io.read_series(args.sim, method.variable, args.calendar)
    out = _out_path(args, "corrected.csv")
    tf_path = Path(args.transfer_out) if args.transfer_out else out.with_suffix(".tf.json")
    if args.transfer:
        tf = qmap.transfer_function_from_dict(io.read_json(args.transfer))
        io.write_series(qmap.apply(tf, sim), out)
        print(out)
        return 0
    if not args.obs:
        raise ConfigError("correct needs --obs (or --transfer to reuse a trained map)")
    obs = io.read_series(args.obs, method.variable, args.calendar)
    full = qmap.train(method, sim, obs, args.threshold)
    payload = {"method": method.value, "k": args.k, "full_period": full.to_dict()}
    if args.k >= 2:
        res = qmap.crossval_correct(sim, obs, method, args.k, args.threshold)
        corrected = res.corrected
        payload["blocks"] = [list(b) for b in res.blocks]
        payload["folds"] = [tf.to_dict() for tf in res.fold_maps]
    else:
        corrected = qmap.apply(full, sim)
    io.write_series(corrected, out)
    io.write_json(tf_path, payload)
    print(out)
    print(tf_path)
    return 0


def cmd_pet(args) -> int:
    temp = io.read_series(args.temp, Variable.TEMP, args.calendar)
    pet = oudin_pet(temp, SiteGeometry.from_degrees(args.latitude))
    out = _out_path(args, "pet.csv")
    io.write_series(pet, out)
    print(out)
    return 0


def _forcing(args):
    precip = io.read_series(args.precip, Variable.PRECIP, args.calendar)
    if args.pet:
        pet = io.read_series(args.pet, Variable.PET, args.calendar)
    elif args.temp:
        pet = oudin_pet(io.read_series(args.temp, Variable.TEMP, args.calendar),
                        SiteGeometry.from_degrees(args.latitude))
    else:
        raise ConfigError("need --pet or --temp")
    if not precip.same_axis(pet):
        raise ConfigError("precipitation and PET must cover the same days")
    return precip, pet


def _meta(args, cal=None, val=None) -> CatchmentMeta:
    try:
        return CatchmentMeta(args.area, math.radians(args.latitude), cal, val, args.warmup)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_calibrate(args) -> int:
    precip, pet = _forcing(args)
    flow = io.read_series(args.flow, Variable.FLOW, args.calendar)
    meta = _meta(args, args.cal_period, args.val_period)
    params, report = calibrate(precip, pet, flow, meta, budget=args.budget, seed=args.seed,
                               jobs=args.jobs)
    out = _out_path(args, "params.json")
    io.write_json(out, report.to_dict())
    print(out)
    return 0


def cmd_simulate(args) -> int:
    d = io.read_json(args.params)
    try:
        params = BucketParams.from_dict(d.get("params", d))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{args.params}: invalid parameters ({exc})") from None
    precip, pet = _forcing(args)
    flow = simulate(params, precip, pet, _meta(args))
    out = _out_path(args, "flow.csv")
    io.write_series(flow, out)
    print(out)
    return 0


def cmd_indices(args) -> int:
    sim = io.read_series(args.sim, args.variable, args.calendar)
    obs = io.read_series(args.obs, args.variable or sim.variable.value, args.calendar)
    rows = normalize_mse([index_report(sim, obs)])[0]  # a lone report is its own ensemble
    out = _out_path(args, "indices.csv")
    io.write_rows(out, REPORT_HEADER, [
        [args.catchment, args.model, args.resolution, args.correction, r.id, r.measure.value,
         r.sim_value, r.obs_value, r.value] for r in rows])
    print(out)
    return 0


def cmd_evaluate(args) -> int:
    if not args.config:
        raise ConfigError("evaluate needs --config")
    config = ExperimentConfig.load(args.config)
    overrides = {}
    if args.out:
        overrides["out_dir"] = Path(args.out)
    if args.seed_given:
        overrides["seed"] = args.seed
    if overrides:
        config = replace(config, **overrides)
    result = run_evaluation(config, jobs=args.jobs)
    print(config.out_dir)
    if result.failures:
        for c in result.failures:
            print(f"hydrobc: cell failed [{c.code}]: {c.catchment}/{c.model.label}/{c.correction}: {c.error}",
                  file=sys.stderr)
        raise _Failure("E_CELLS", f"{len(result.failures)} evaluation cell(s) failed")
    return 0


def cmd_rank(args) -> int:
    variable = Variable(args.variable)
    grouped = read_reports(args.reports, variable, args.correction, args.catchment)
    if not grouped:
        raise ConfigError(f"no {args.correction} rows for {variable.value} in {args.reports}")
    out = Path(args.out) if args.out else None
    indices = tuple(args.indices.split(",")) if args.indices else RANKED_INDICES[variable]
    for catchment, reports in sorted(grouped.items()):
        table = rank_models(reports, indices, absolute=not args.signed)
        if out is None:
            print(f"# {catchment} {variable.value}")
            print(",".join(table.header()))
            for row in table.rows():
                print(",".join(str(x) for x in row))
        else:
            io.write_rows(out / f"{catchment}_{variable.value}.csv", table.header(), table.rows())
    if out is not None:
        print(out)
    return 0


# -- parser ------------------------------------------------------------------------

def _global_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers (default $HYDROBC_JOBS or 1)")
    p.add_argument("--calendar", default=None,
                   help="calendar for CSV input without a sidecar (gregorian, noleap365, fixed360)")
    p.add_argument("-v", "--verbose", action="store_true", default=None)
    return p


_GLOBALS = ("seed", "config", "out", "jobs", "calendar", "verbose")


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    top = argparse.ArgumentParser(prog="hydrobc", parents=[common],
                                  description="Bias correction, hydrological simulation and evaluation "
                                              "of daily climate-model output.")
    top.add_argument("--version", action="version", version=f"hydrobc {__version__}")
    sub = top.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=fn)
        return p

    p = add("synth", cmd_synth, "Write a synthetic obs/sim pair or a full synthetic experiment.")
    p.add_argument("--years", type=int, default=20)
    p.add_argument("--correlation", type=float, default=0.8)
    p.add_argument("--temp-shift", type=float, default=1.0)
    p.add_argument("--wet-scale", type=float, default=1.2)
    p.add_argument("--drizzle", type=float, default=0.1)
    p.add_argument("--tail-inflation", type=float, default=1.5)
    p.add_argument("--experiment", action="store_true", help="write an ensemble experiment with config")
    p.add_argument("--catchments", type=int, default=4)
    p.add_argument("--models", type=int, default=5, help="model names (two resolutions each)")
    p.add_argument("--budget", type=int, default=2000, help="calibration budget written to the config")

    p = add("fit", cmd_fit, "Fit monthly Gamma (wet days) or Normal distributions to a series.")
    p.add_argument("--input", required=True)
    p.add_argument("--variable", choices=[v.value for v in Variable])
    p.add_argument("--dist", choices=["gamma", "normal"])
    p.add_argument("--threshold", type=float, default=DEFAULT_OBS_DRY_THRESHOLD, help="wet-day threshold")

    p = add("correct", cmd_correct, "Cross-validated quantile-mapping correction.")
    p.add_argument("--method", required=True, choices=[m.value for m in qmap.QmMethod])
    p.add_argument("--sim", required=True)
    p.add_argument("--obs")
    p.add_argument("--k", type=int, default=5, help="folds; 1 trains and applies on the full period")
    p.add_argument("--threshold", type=float, default=DEFAULT_OBS_DRY_THRESHOLD,
                   help="observed dry-day threshold in mm/day")
    p.add_argument("--transfer", help="apply a saved transfer function instead of training")
    p.add_argument("--transfer-out", help="where to write the transfer-function JSON")

    p = add("pet", cmd_pet, "Oudin potential evapotranspiration from daily temperature.")
    p.add_argument("--temp", required=True)
    p.add_argument("--latitude", type=float, required=True, help="degrees north")

    for name, fn, help_ in (("calibrate", cmd_calibrate, "Calibrate the bucket model to gauged flow."),
                            ("simulate", cmd_simulate, "Run the bucket model and write daily flow.")):
        p = add(name, fn, help_)
        p.add_argument("--precip", required=True)
        p.add_argument("--pet")
        p.add_argument("--temp", help="temperature, used for Oudin PET when --pet is absent")
        p.add_argument("--area", type=float, required=True, help="catchment area in km2")
        p.add_argument("--latitude", type=float, default=52.0, help="degrees north")
        p.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
        if name == "calibrate":
            p.add_argument("--flow", required=True)
            p.add_argument("--cal-period", type=_period, required=True, metavar="FIRST:LAST")
            p.add_argument("--val-period", type=_period, required=True, metavar="FIRST:LAST")
            p.add_argument("--budget", type=int, default=5000)
        else:
            p.add_argument("--params", required=True)

    p = add("indices", cmd_indices, "Evaluation indices of one series against another.")
    p.add_argument("--sim", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--variable", choices=[v.value for v in Variable])
    p.add_argument("--catchment", default="-")
    p.add_argument("--model", default="-")
    p.add_argument("--resolution", default="-")
    p.add_argument("--correction", default="raw")

    add("evaluate", cmd_evaluate, "Run a full experiment from --config.")

    p = add("rank", cmd_rank, "Rank models from written reports.")
    p.add_argument("--reports", required=True, help="directory holding report_<variable>.csv")
    p.add_argument("--variable", default=Variable.PRECIP.value,
                   choices=[Variable.PRECIP.value, Variable.TEMP.value, Variable.FLOW.value])
    p.add_argument("--correction", default="raw", help="rank another variant (not meaningful for QM)")
    p.add_argument("--catchment")
    p.add_argument("--indices", help="comma-separated index ids (default: the standard set)")
    p.add_argument("--signed", action="store_true", help="order biases by signed value")
    return top


def _parse(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    # Global options may precede the subcommand; the subparser would reset
    # them to None, so parse the leading part separately and fill the gaps.
    args = parser.parse_args(argv)
    lead = argv[:argv.index(args.command)] if args.command in argv else []
    pre, _ = _global_options().parse_known_args(lead)
    for name in _GLOBALS:
        if getattr(args, name) is None:
            setattr(args, name, getattr(pre, name))
    return args


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    if args.jobs is None:
        args.jobs = _default_jobs()
    if args.jobs < 1:
        print("hydrobc: error [E_CONFIG]: --jobs must be at least 1", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="hydrobc: %(levelname)s: %(message)s", force=True)
    try:
        return args.func(args)
    except HydroBCError as exc:
        print(f"hydrobc: error [{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"hydrobc: error [E_INPUT]: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"hydrobc: error [E_INPUT]: invalid JSON: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"hydrobc: error [E_INPUT]: {exc}", file=sys.stderr)
        return 2
    except _Failure as exc:
        print(f"hydrobc: error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 -- last-resort report with internal code
        print(f"hydrobc: error [E_INTERNAL]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
