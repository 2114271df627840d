import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hydrobc import io
from hydrobc.errors import ConfigError, StructuralError
from hydrobc.indices import RANKED_INDICES, IndexValue, Measure
from hydrobc.pipeline import (
    TRUE_PARAMS,
    Curve,
    ExperimentConfig,
    ensemble_envelope,
    rank_models,
    read_reports,
    report_path,
    run_evaluation,
    write_synthetic_experiment,
)
from hydrobc.synth import SimBias, synth_generate, uk_like_spec
from hydrobc.timeseries import Variable


def bias_row(idx, value):
    return IndexValue(idx, Measure.BIAS, value, 0.0, value, "-")


def reports_from(table):
    """{model: [score per index]} -> rank_models input with indices i0, i1, ..."""
    return {(m, "0.11"): [bias_row(f"i{j}", v) for j, v in enumerate(vals)] for m, vals in table.items()}


# -- ranking -----------------------------------------------------------------------

def test_rank_dominant_model():
    t = rank_models(reports_from({"A": [0.1, 0.2, 0.3], "B": [1.0, 2.0, 3.0]}), ["i0", "i1", "i2"])
    assert t.average == (1.0, 2.0)
    assert t.final_rank == (1, 2)


def test_rank_average_example():
    # per-index ranks (1,2), (2,3), (3,1) for models A, B, C
    t = rank_models(reports_from({"A": [1, 2], "B": [2, 3], "C": [3, 1]}), ["i0", "i1"])
    assert t.ranks["i0"] == (1.0, 2.0, 3.0) and t.ranks["i1"] == (2.0, 3.0, 1.0)
    assert t.average == (1.5, 2.5, 2.0)
    assert t.final_rank == (1, 3, 2)
    assert [r[0] for r in t.rows()] == ["A", "C", "B"]


def test_rank_ties_share_mean_rank():
    t = rank_models(reports_from({"A": [0.5], "B": [-0.5], "C": [2.0]}), ["i0"])
    assert t.ranks["i0"] == (1.5, 1.5, 3.0)
    signed = rank_models(reports_from({"A": [0.5], "B": [-0.5], "C": [2.0]}), ["i0"], absolute=False)
    assert signed.ranks["i0"] == (2.0, 1.0, 3.0)


def test_rank_final_ties_broken_by_name():
    t = rank_models(reports_from({"B": [1.0], "A": [1.0]}), ["i0"])
    assert t.final_rank == (2, 1)


def test_rank_missing_is_worst_and_flagged():
    reps = reports_from({"A": [1.0, 1.0], "B": [2.0, math.nan], "C": [3.0, 0.5]})
    reps[("D", "0.11")] = [bias_row("i0", 0.1)]  # no i1 at all
    t = rank_models(reps, ["i0", "i1"])
    assert t.ranks["i1"] == (2.0, 3.5, 1.0, 3.5)
    assert t.flagged == {("i1", 1), ("i1", 3)}
    assert "3.5*" in [c for row in t.rows() for c in row]


def test_rank_measures_orientation():
    reps = {
        ("good", "-"): [IndexValue("spearman", Measure.INDEX, 0.9, 1.0, 0.9, "-"),
                        IndexValue("relative_mse", Measure.MSE_RATIO, 1.0, 0.0, 0.3, "-"),
                        IndexValue("annual_mean", Measure.MPE, 10, 9, -2.0, "%")],
        ("bad", "-"): [IndexValue("spearman", Measure.INDEX, 0.4, 1.0, 0.4, "-"),
                       IndexValue("relative_mse", Measure.MSE_RATIO, 3.0, 0.0, 1.0, "-"),
                       IndexValue("annual_mean", Measure.MPE, 5, 9, 5.0, "%")],
    }
    t = rank_models(reps, ["spearman", "relative_mse", "annual_mean"])
    assert all(t.ranks[i] == (1.0, 2.0) for i in t.indices)


def test_monthly_indices_pooled():
    reps = {("A", "-"): [bias_row(f"rx:{m:02d}", 1.0) for m in range(1, 13)],
            ("B", "-"): [bias_row(f"rx:{m:02d}", 0.0 if m < 12 else 20.0) for m in range(1, 13)]}
    t = rank_models(reps, ["rx"])
    assert t.ranks["rx"] == (1.0, 2.0)  # B's mean badness 20/12 exceeds 1


def test_best_resolution_marker():
    reps = {("X", "0.11"): [bias_row("i0", 1.0)], ("X", "0.44"): [bias_row("i0", 0.5)],
            ("Y", "0.11"): [bias_row("i0", 0.1)], ("Y", "0.44"): [bias_row("i0", 3.0)],
            ("Z", "0.44"): [bias_row("i0", 2.0)]}
    t = rank_models(reps, ["i0"])
    assert t.best_resolution == (False, True, True, False, False)


@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=2, max_size=8))
def test_rank_columns_are_mean_rank_permutations(scores):
    reps = {(f"M{i}", "-"): [bias_row(f"i{j}", float(v)) for j, v in enumerate(row)]
            for i, row in enumerate(scores)}
    t = rank_models(reps, ["i0", "i1", "i2"])
    n = len(scores)
    for col in t.ranks.values():
        assert sum(col) == pytest.approx(n * (n + 1) / 2)
        assert all(1 <= r <= n for r in col)
    assert sorted(t.final_rank) == list(range(1, n + 1))
    order = sorted(range(n), key=lambda i: t.final_rank[i])
    assert all(t.average[a] <= t.average[b] for a, b in zip(order, order[1:]))


# -- envelopes ---------------------------------------------------------------------

def test_envelope_examples():
    x = np.arange(1, 100.0)
    f = np.sin(x)
    env = ensemble_envelope({"0.44": [Curve(x, f)], "0.11": [Curve(x, f), Curve(x, f + 1)]})
    assert np.array_equal(env["0.44"].lower, f) and np.array_equal(env["0.44"].upper, f)
    assert np.array_equal(env["0.11"].lower, f) and np.array_equal(env["0.11"].upper, f + 1)
    with pytest.raises(StructuralError):
        ensemble_envelope({"g": [Curve(x, f), Curve(x + 1, f)]})
    with pytest.raises(StructuralError):
        ensemble_envelope({"g": []})


@given(st.integers(1, 8), st.integers(0, 10_000))
def test_envelope_contains_members(n, seed):
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 1, 20)
    curves = [Curve(x, rng.normal(size=20)) for _ in range(n)]
    env = ensemble_envelope({"g": curves})["g"]
    assert np.all(env.lower <= env.upper)
    for c in curves:
        assert np.all(env.lower <= c.y) and np.all(c.y <= env.upper)


# -- config ----------------------------------------------------------------------

def base_config():
    return {
        "catchments": [{"name": "C1", "area_km2": 100, "latitude_deg": 52,
                        "calibration_period": ["1982-01-01", "1983-12-31"],
                        "validation_period": ["1984-01-01", "1985-12-31"],
                        "obs": {"precip": "p.csv", "temp": "t.csv", "flow": "q.csv"}}],
        "models": [{"name": "M", "resolution": "0.11",
                    "forcing": {"C1": {"precip": "mp.csv", "temp": "mt.csv"}}}],
    }


def test_config_parses():
    cfg = ExperimentConfig.from_dict(base_config(), "/data")
    assert cfg.k == 5 and cfg.corrections == ("raw", "gqm", "dgqm")
    assert str(cfg.catchments[0].precip.cells[0][0]) == "/data/p.csv"
    assert str(cfg.out_dir) == "/data/results"


@pytest.mark.parametrize("mutate", [
    lambda d: d["models"].append(dict(d["models"][0])),
    lambda d: d.update(k=1),
    lambda d: d.update(corrections=["raw", "eqm"]),
    lambda d: d.update(corrections=[]),
    lambda d: d["models"][0]["forcing"].pop("C1"),
    lambda d: d["catchments"][0].pop("area_km2"),
    lambda d: d["catchments"][0]["obs"].pop("flow"),
    lambda d: d["catchments"][0].update(validation_period=["1983-01-01", "1985-12-31"]),
    lambda d: d["catchments"][0].update(calibration_period=["1982-13-01", "1983-12-31"]),
    lambda d: d["catchments"][0].update(params={"smax": 5000, "beta": 1, "alpha": 0.5, "kq": 2, "ks": 20}),
    lambda d: d.update(models=[]),
])
def test_config_errors(mutate):
    d = base_config()
    mutate(d)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(d)


def test_config_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(p)


# -- small experiments ---------------------------------------------------------------

def write_hand_experiment(root, biases, years=6, seed=0, corrections=("raw", "gqm", "dgqm"), self_model=False):
    """Observations plus one model per bias, with fixed (uncalibrated) parameters."""
    spec = uk_like_spec(years=years)
    obs = synth_generate(spec, seed)
    io.write_series(obs.obs_precip, root / "obs_p.csv")
    io.write_series(obs.obs_temp, root / "obs_t.csv")
    models = []
    for i, b in enumerate(biases):
        pair = synth_generate(dataclasses.replace(spec, bias=b, correlation=1.0), seed)
        io.write_series(pair.sim_precip, root / f"m{i}_p.csv")
        io.write_series(pair.sim_temp, root / f"m{i}_t.csv")
        models.append({"name": f"M{i}", "resolution": "0.11",
                       "forcing": {"C1": {"precip": f"m{i}_p.csv", "temp": f"m{i}_t.csv"}}})
    if self_model:
        models.append({"name": "SELF", "resolution": "0.11",
                       "forcing": {"C1": {"precip": "obs_p.csv", "temp": "obs_t.csv"}}})
    d = {"catchments": [{"name": "C1", "area_km2": 150, "latitude_deg": 52.5,
                         "calibration_period": ["1982-01-01", "1983-12-31"],
                         "validation_period": ["1984-01-01", f"{1980 + years}-12-31"],
                         "obs": {"precip": "obs_p.csv", "temp": "obs_t.csv"},
                         "params": TRUE_PARAMS.to_dict()}],
         "models": models, "corrections": list(corrections), "out": "results", "seed": seed}
    io.write_json(root / "exp.json", d)
    return ExperimentConfig.load(root / "exp.json")


def test_self_comparison(tmp_path):
    cfg = write_hand_experiment(tmp_path, [], corrections=("raw",), self_model=True)
    res = run_evaluation(cfg, write=False)
    assert not res.failures
    for v in (Variable.PRECIP, Variable.TEMP, Variable.FLOW):
        for r in res.cells[0].rows[v]:
            if r.measure in (Measure.BIAS, Measure.MPE) and math.isfinite(r.value):
                assert r.value == pytest.approx(0.0, abs=1e-9), (v, r.id)
            if r.id in ("spearman", "pearson", "monthly_nse"):
                assert r.value == pytest.approx(1.0)


def test_injected_biases_recovered(tmp_path):
    cfg = write_hand_experiment(tmp_path, [SimBias(temp_shift=1.5), SimBias(temp_shift=-0.7, wet_scale_factor=1.3)],
                                corrections=("raw", "gqm"))
    res = run_evaluation(cfg, write=False)
    t0 = res.index("C1", "M0", "0.11", "raw", Variable.TEMP, "annual_mean")
    t1 = res.index("C1", "M1", "0.11", "raw", Variable.TEMP, "annual_mean")
    assert t0.value == pytest.approx(1.5, abs=1e-9)  # rank-coupled pair: exact shift
    assert t1.value == pytest.approx(-0.7, abs=1e-9)
    p1 = res.index("C1", "M1", "0.11", "raw", Variable.PRECIP, "annual_mean")
    assert p1.value == pytest.approx(30.0, abs=0.5)
    c1 = res.index("C1", "M1", "0.11", "gqm", Variable.TEMP, "annual_mean")
    assert abs(c1.value) < 0.1
    # one MSE denominator per catchment and variable across raw and corrected runs
    ratios = [r.value for c in res.cells for r in c.rows[Variable.PRECIP] if r.id == "relative_mse"]
    assert max(ratios) == 1.0 and len(ratios) == 4
    assert set(res.ranks) == {("C1", v) for v in (Variable.PRECIP, Variable.TEMP, Variable.FLOW)}


@pytest.fixture(scope="module")
def synthetic(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthetic")
    path = write_synthetic_experiment(root, n_catchments=1, n_names=2, years=6, seed=3,
                                      corrections=("raw", "dgqm"), calibration_budget=500)
    cfg = ExperimentConfig.load(path)
    return cfg, run_evaluation(cfg)


def test_synthetic_outputs_written(synthetic):
    cfg, res = synthetic
    out = cfg.out_dir
    assert not res.failures
    for v in (Variable.PRECIP, Variable.TEMP, Variable.FLOW):
        rows = io.read_rows(report_path(out, v))
        assert len(rows) == sum(len(c.rows[v]) for c in res.cells)
        assert list(rows[0]) == ["catchment", "model", "resolution", "correction", "index",
                                 "measure", "sim", "obs", "value"]
        table = io.read_rows(out / "ranks" / f"C01_{v.value}.csv")
        assert len(table) == 4
        assert list(table[0])[2:-3] == list(RANKED_INDICES[v])
    for name in ("curves.csv", "envelopes.csv", "calibration.json", "reports.json", "failures.json"):
        assert (out / name).exists()
    assert io.read_json(out / "failures.json") == []
    assert io.read_json(out / "calibration.json")["C01"]["validation"]["nse"] > 0.9
    envs = io.read_rows(out / "envelopes.csv")
    assert all(float(r["min"]) <= float(r["max"]) for r in envs)


def test_ranks_only_raw_and_rereadable(synthetic):
    cfg, res = synthetic
    reps = read_reports(cfg.out_dir, Variable.FLOW)["C01"]
    assert len(reps) == 4
    again = rank_models(reps, RANKED_INDICES[Variable.FLOW])
    assert again.final_rank == res.ranks[("C01", Variable.FLOW)].final_rank


def test_deterministic_outputs(synthetic, tmp_path):
    cfg, _ = synthetic
    run_evaluation(dataclasses.replace(cfg, out_dir=tmp_path / "again"))
    for name in ("report_precip_mm_day.csv", "report_flow_m3s.csv", "curves.csv", "envelopes.csv", "calibration.json"):
        matches = list(cfg.out_dir.glob(name.split("_")[0] + "*")) if name.startswith("report") else []
        for a in matches or [cfg.out_dir / name]:
            assert a.read_bytes() == (tmp_path / "again" / a.name).read_bytes(), a.name


def test_removing_a_model_removes_its_rows(synthetic):
    cfg, res = synthetic
    gone = cfg.models[0]
    smaller = run_evaluation(dataclasses.replace(cfg, models=cfg.models[1:]), write=False)

    def keyed(r, skip_mse):
        out = {}
        for v in (Variable.PRECIP, Variable.TEMP, Variable.FLOW):
            for row in r.rows(v):
                if skip_mse and row[5] == "mse_ratio":
                    row = row[:8]  # the ratio depends on the ensemble maximum
                out[(v, *row[:5])] = row
        return out

    full, part = keyed(res, True), keyed(smaller, True)
    removed = {k for k in full if k[2] == gone.name and k[3] == gone.resolution}
    assert removed and set(part) == set(full) - removed
    assert all(part[k] == full[k] for k in part)


def test_failed_cell_is_recorded(tmp_path):
    cfg = write_hand_experiment(tmp_path, [SimBias(), SimBias(temp_shift=1.0)], corrections=("raw",))
    (tmp_path / "m1_p.csv").unlink()
    res = run_evaluation(cfg)
    assert [(c.model.name, c.code) for c in res.failures] == [("M1", "E_INPUT")]
    assert len([c for c in res.cells if c.error is None]) == 1
    fails = io.read_json(cfg.out_dir / "failures.json")
    assert fails[0]["model"] == "M1"
