import csv
import io
import json
import math

import pytest

from epblockade import cli
from epblockade.cli import (FIGURES, GridSpec, figure_scenario, main, parse_params, parse_scenario,
                            run_scenario)
from epblockade.errors import ConfigError, UnknownFigure
from epblockade.params import (CHI_STANDARD, CHI_STRONG, CHI_WEAK, DEVICE_LAMBDA, DEVICE_N0,
                               DEVICE_Q, DEVICE_VEFF, PAPER_EPS1, kerr_coefficient,
                               nth_from_temperature, resonant_delta0)
from epblockade.tables import ResultTable, format_value, to_csv, to_json

PI = math.pi
SENTINELS = {"inf", "-inf", "nan-flagged"}
SMALL = dict(name="small", task="beta_sweep", params=dict(xi=0.25),
             grid=dict(start=0, stop=1, count=9))
TINY_MASTER = dict(task="single_point", engine="master", params=dict(beta_pi=0.5),
                   basis=dict(kind="per_mode", n=[2, 2]))


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _read_csv(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(body))


def _run(tmp_path, cfg, *extra, out="out.csv"):
    target = tmp_path / out
    code = main(["--config", _write(tmp_path, cfg), "--out", str(target), *extra])
    return code, target.read_text() if target.exists() else ""


# ---------------------------------------------------------------- parsing

def test_params_defaults_and_forms():
    p = parse_params({})
    assert p.eps1 == PAPER_EPS1 and p.chi == CHI_STANDARD and p.xi == 0.25
    assert p.delta0 == pytest.approx(resonant_delta0(p.eps1, p.eps2))
    q = parse_params({"eps1": {"re": 1.0, "im": -0.2}, "eps2": [0.5, 0], "beta_pi": 0.5, "delta0": 1})
    assert q.eps1 == 1 - 0.2j and q.eps2 == 0.5 and q.beta == pytest.approx(PI / 2)
    assert q.delta0 == 1.0


def test_params_si_conversions():
    p = parse_params({"gamma_si": 2e9, "xi_si": 5e8, "eps1_si": [3e9, -2e8]})
    assert p.xi == pytest.approx(0.25) and p.eps1 == pytest.approx(1.5 - 0.1j)
    k = parse_params({"n2_si": 3e-15})
    assert k.chi == pytest.approx(kerr_coefficient(DEVICE_LAMBDA, 3e-15, DEVICE_N0, DEVICE_VEFF, DEVICE_Q))
    t = parse_params({"temperature_si": 9000, "nth_convention": "paper_literal"})
    assert t.nth == pytest.approx(nth_from_temperature(9000, DEVICE_LAMBDA, "paper_literal"))


@pytest.mark.parametrize("raw, key", [
    ({"kerr": 1}, "params.kerr"),
    ({"chi": "big"}, "params.chi"),
    ({"xi_si": 1e8}, "params.xi_si"),
    ({"xi_si": 1e8, "xi": 0.1, "gamma_si": 1e9}, "params.xi_si"),
    ({"beta": 1, "beta_pi": 1}, "params.beta_pi"),
    ({"n2_si": 1e-15, "chi": 2}, "params.n2_si"),
    ({"q": 1e6}, "params.n2_si"),
    ({"gamma": 2}, "params.gamma"),
    ({"sigma": 0}, "params.sigma"),
    ({"eps1": [1, 2, 3]}, "params.eps1"),
    ({"temperature_si": -5}, "params.temperature_si"),
    ({"nth_convention": "planck"}, "params.nth_convention"),
    ({"xi": -1}, "params"),
])
def test_params_errors_name_the_key(raw, key):
    with pytest.raises(ConfigError) as exc:
        parse_params(raw)
    assert exc.value.key == key


@pytest.mark.parametrize("patch, key", [
    ({"colour": "red"}, "colour"),
    ({"task": "dance"}, "task"),
    ({"engine": "gpu"}, "engine"),
    ({"grid": {"start": 0, "stop": 1, "count": 1}}, "grid.count"),
    ({"grid": {"start": 0, "stop": 1, "count": 2.5}}, "grid.count"),
    ({"grid": {"start": 0, "count": 3}}, "grid.stop"),
    ({"grid": {"start": 0, "stop": 1, "count": 3, "unit": "gamma"}}, "grid.unit"),
    ({"grid": None}, "grid"),
    ({"basis": {"kind": "per_mode", "n": 3}}, "basis.n"),
    ({"evolution": {"dt": -1}}, "evolution"),
    ({"evolution": {"speed": 1}}, "evolution"),
    ({"output": {"format": "xml"}}, "output.format"),
    ({"ep": {"tol": 1}}, "ep.tol"),
    ({"upb": {"mode": "guess"}}, "upb.mode"),
    ({"loss_model": "both"}, "loss_model"),
])
def test_scenario_errors_name_the_key(patch, key):
    raw = {**SMALL, **patch}
    if raw["grid"] is None:
        del raw["grid"]
    with pytest.raises(ConfigError) as exc:
        parse_scenario(raw)
    assert exc.value.key == key


def test_thermal_scenario_validation():
    base = dict(task="thermal_sweep", engine="master", beta_pi_list=[0.5], nth_grid=[0, 0.1])
    sc = parse_scenario(base)
    assert sc.beta_list == (0.5 * PI,) and sc.nth_grid == (0.0, 0.1)
    for patch, key in [({"engine": "analytic"}, "engine"), ({"beta_pi_list": []}, "beta_pi_list"),
                       ({"nth_grid": [0.1]}, "nth_grid"), ({"nth_grid": [0, -1]}, "nth_grid")]:
        with pytest.raises(ConfigError) as exc:
            parse_scenario({**base, **patch})
        assert exc.value.key == key
    temps = parse_scenario({**{k: v for k, v in base.items() if k != "nth_grid"},
                            "temperature_si_grid": {"values": [3000, 9000], "convention": "paper_literal"}})
    assert temps.nth_grid[1] == pytest.approx(nth_from_temperature(9000, DEVICE_LAMBDA, "paper_literal"))


def test_grid_units():
    assert parse_scenario(SMALL).grid.values()[-1] == pytest.approx(PI)
    det = parse_scenario(dict(task="detuning_sweep", grid=dict(start=-2, stop=2, count=5)))
    assert det.grid.unit == "gamma" and list(det.grid.values()) == [-2, -1, 0, 1, 2]
    rad = parse_scenario({**SMALL, "grid": dict(start=0, stop=1, count=2, unit="rad")})
    assert list(rad.grid.values()) == [0, 1]


def test_overrides():
    sc = parse_scenario(SMALL, task="upb_solve", engine="master")
    assert sc.task == "upb_solve" and sc.engine == "master"


# ---------------------------------------------------------------- exit codes

def test_exit_code_config_errors(tmp_path, capsys):
    assert main(["--config", _write(tmp_path, {**SMALL, "grid": {"start": 0, "stop": 1, "count": 1}})]) == 2
    assert "grid.count" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad)]) == 2
    assert "invalid JSON" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.json")]) == 2
    assert main(["--config", _write(tmp_path, SMALL), "--threads", "0"]) == 2
    assert main(["--figure", "figS8", "--engine", "analytic"]) == 2


def test_exit_code_numerical_failure(tmp_path, capsys):
    cfg = {**TINY_MASTER, "name": "short", "evolution": {"t_max": 10.5}}
    code, _ = _run(tmp_path, cfg)
    assert code == 3
    err = capsys.readouterr().err
    assert "numerical failure" in err and "'short'" in err


# ---------------------------------------------------------------- output

def test_csv_layout(tmp_path):
    code, text = _run(tmp_path, SMALL)
    assert code == 0
    lines = text.splitlines()
    meta = {ln[2:].split(": ", 1)[0]: ln[2:].split(": ", 1)[1] for ln in lines if ln.startswith("#")}
    assert {"artifact", "version", "params", "grid", "generated", "scenario", "task"} <= set(meta)
    echo = json.loads(meta["params"])
    assert echo["eps1"] == [1.5, -0.1] and echo["xi"] == 0.25
    rows = _read_csv(text)
    assert len(rows) == 9
    assert list(rows[0])[:2] == ["beta", "g2_11"]
    for r in rows:
        for k, v in r.items():
            if k != "regime":
                assert v in SENTINELS or math.isfinite(float(v))
        assert "e" in r["g2_11"] and len(r["g2_11"].split("e")[0].replace("-", "").replace(".", "")) == 12


def test_rerun_is_byte_identical(tmp_path):
    _, a = _run(tmp_path, SMALL, out="a.csv")
    _, b = _run(tmp_path, SMALL, out="b.csv")
    strip = lambda t: [ln for ln in t.splitlines() if not ln.startswith("# generated")]
    assert strip(a) == strip(b)
    _, ja = _run(tmp_path, SMALL, "--format", "json", out="a.json")
    _, jb = _run(tmp_path, SMALL, "--format", "json", out="b.json")
    da, db = json.loads(ja), json.loads(jb)
    da["metadata"].pop("generated"), db["metadata"].pop("generated")
    assert da == db


def test_json_output(tmp_path):
    code, text = _run(tmp_path, SMALL, "--format", "json", out="o.json")
    doc = json.loads(text)
    assert code == 0 and doc["columns"][0] == "beta" and len(doc["rows"]) == 9
    assert doc["metadata"]["scenario"] == "small"


def test_threads_preserve_order():
    sc = parse_scenario({**SMALL, "grid": dict(start=0, stop=2, count=41)})
    one = run_scenario(sc, threads=1)
    four = run_scenario(sc, threads=4)
    assert one.rows == four.rows


def test_sentinels_for_vanishing_means():
    sc = parse_scenario({**TINY_MASTER, "engine": "both", "params": {"xi": 0}})
    tab = run_scenario(sc)
    row = _read_csv(to_csv(tab))[0]
    assert row["g2_11"] == row["g2_11_me"] == "inf"
    assert row["g2_11_reldiff"] == "nan-flagged"


def test_format_value_and_tables():
    assert format_value(True) == "1" and format_value(3) == "3"
    assert format_value(float("nan")) == "nan-flagged" and format_value(None) == "nan-flagged"
    assert format_value(-float("inf")) == "-inf"
    assert format_value(1 / 3) == "3.33333333333e-01"
    with pytest.raises(ValueError):
        ResultTable(["a", "b"], [(1,)])
    t = ResultTable(["a"], [(float("inf"),)], {"k": 1})
    assert json.loads(to_json(t))["rows"] == [["inf"]]
    assert t.column("a") == [float("inf")]


def test_engine_both_columns(tmp_path):
    cfg = {**SMALL, "engine": "both", "grid": dict(start=0.45, stop=0.55, count=3),
           "basis": {"kind": "per_mode", "n": [3, 3]}}
    code, text = _run(tmp_path, cfg)
    rows = _read_csv(text)
    assert code == 0 and len(rows) == 3
    assert {"g2_11_me", "P10_me", "regime_me", "g2_11_reldiff"} <= set(rows[0])
    for r in rows:
        rel = (float(r["g2_11_me"]) - float(r["g2_11"])) / abs(float(r["g2_11"]))
        assert float(r["g2_11_reldiff"]) == pytest.approx(rel, rel=1e-9)
    assert "# basis: [\"per_mode\", 3, 3]" in text


def test_dump_operators_and_trace_log(tmp_path):
    dump, trace = tmp_path / "ops.json", tmp_path / "trace.csv"
    code, text = _run(tmp_path, TINY_MASTER, "--dump-operators", str(dump), "--trace-log", str(trace))
    assert code == 0
    ops = json.loads(dump.read_text())
    assert len(ops["states"]) == 9 and len(ops["h_plus"]) == 9 and len(ops["jumps"]) == 2
    assert ops["params"]["beta"] == pytest.approx(PI / 2)
    rows = _read_csv(trace.read_text())
    assert list(rows[0]) == ["t", "trace", "purity", "mean_m", "mean_n"]
    assert float(rows[0]["t"]) == 0 and float(rows[0]["purity"]) == 1
    assert all(abs(float(r["trace"]) - 1) < 1e-9 for r in rows)


def test_ep_scan_flags():
    sc = parse_scenario(dict(task="ep_scan_h", grid=dict(start=0, stop=2, count=721)))
    tab = run_scenario(sc)
    assert tab.columns == ["beta", "reEgap", "imEgap", "overlap", "is_ep"]
    flagged = [b / PI for b in tab.metadata["ep_betas"]]
    assert any(abs(b - 0.496) < 0.002 for b in flagged)
    assert any(abs(b - 1.496) < 0.002 for b in flagged)


def test_detuning_sweep_minima():
    sc = parse_scenario(dict(task="detuning_sweep", params=dict(chi=CHI_STRONG, beta_pi=1),
                             grid=dict(start=-8, stop=2, count=101)))
    tab = run_scenario(sc)
    x, g = tab.column("delta0"), tab.column("g2_11")
    minima = [x[i] for i in range(1, len(g) - 1) if g[i] < g[i - 1] and g[i] < g[i + 1]]
    assert any(abs(m + 6) < 0.5 for m in minima) and any(abs(m) < 0.5 for m in minima)


def test_upb_solve_tables():
    tab = run_scenario(parse_scenario(dict(task="upb_solve")))
    assert tab.columns == ["beta", "beta_pi"]
    assert [round(v, 3) for v in tab.column("beta_pi")] == [0.405, 0.595, 1.405, 1.595]
    cubic = run_scenario(parse_scenario(dict(task="upb_solve", upb=dict(mode="general_cubic"))))
    assert cubic.columns == ["beta", "re_delta", "delta0"] and cubic.rows


# ---------------------------------------------------------------- figures

def test_figure_scenarios():
    expect = {"fig1b": ("beta_sweep", CHI_STRONG), "fig2a": ("beta_sweep", CHI_STRONG),
              "fig3a": ("detuning_sweep", CHI_STRONG), "figS1": ("eigen_sweep", CHI_STANDARD),
              "figS2": ("ep_scan_l", CHI_STANDARD), "figS6": ("beta_sweep", CHI_STANDARD),
              "figS7": ("detuning_sweep", CHI_WEAK), "figS8": ("thermal_sweep", CHI_STANDARD)}
    for fid in FIGURES:
        sc = figure_scenario(fid)
        assert sc.name == fid
        if fid in expect:
            assert (sc.task, sc.params.chi) == expect[fid]
    assert figure_scenario("fig2a").engine == "both"
    assert figure_scenario("fig2a").params.xi == 0.25
    s8 = figure_scenario("figS8")
    assert [round(b / PI, 2) for b in s8.beta_list] == [0.5, 0.6, 1.0]
    with pytest.raises(UnknownFigure):
        figure_scenario("fig9")


def test_figure_s7_via_main(tmp_path):
    out = tmp_path / "s7.csv"
    assert main(["--figure", "figS7", "--out", str(out)]) == 0
    rows = _read_csv(out.read_text())
    assert len(rows) == 2 * 241
    assert list(rows[0])[:3] == ["beta", "delta0", "g2_11"]
    assert {round(float(r["beta"]) / PI, 3) for r in rows} == {0.5, 1.0}


def test_figure_s1_eigen_sweep():
    tab = cli.reproduce_figure("figS1")
    assert len(tab.rows) == 201 and "overlap1" in tab.columns
    ov, betas = tab.column("overlap1"), tab.column("beta")
    peak = betas[ov.index(max(ov))] / PI
    # the grid straddles the EP pair at 0.496 / 0.504 (and its mirror at 1.496 / 1.504)
    assert min(abs(peak - e) for e in (0.496, 0.504, 1.496, 1.504)) < 0.01


def test_grid_spec_values():
    assert list(GridSpec(0, 1, 3, "rad").values()) == [0, 0.5, 1]


def test_stdout_output(capsys, tmp_path):
    assert main(["--config", _write(tmp_path, {**SMALL, "task": "upb_solve"})]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# artifact: epblockade")
    assert len(_read_csv(out)) == 4
    assert io.StringIO(out).readline().strip() == "# artifact: epblockade"
