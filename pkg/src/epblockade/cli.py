"""Batch front-end: scenario configs in, deterministic CSV/JSON tables out.

Config files are JSON. Rates are in units of gamma unless given with an ``_si``
suffix (rad/s, converted with ``gamma_si``). Angles in ``params`` accept
``beta`` (radians) or ``beta_pi`` (multiples of pi); beta grids default to
units of pi.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .analytic import (correlations, label_regimes, probabilities, steady_amplitudes, sweep,
                       upb_angles)
from .errors import ConfigError, EpBlockadeError, NonConvergence, StepUnstable, TrackingLost, UnknownFigure
from .hilbert import dump_operator, per_mode, total_excitation
from .master import EvolutionOptions, evolve_to_steady, observables, system_operators, thermal_sweep
from .params import (CHI_STANDARD, CHI_STRONG, CHI_WEAK, DEVICE_LAMBDA, DEVICE_N0, DEVICE_Q,
                     DEVICE_VEFF, PAPER_EPS1, PAPER_EPS2, PAPER_XI, SystemParams,
                     kerr_coefficient, nth_from_temperature, resonant_delta0)
from .spectra import closed_form_eigensystem, hamiltonian_ep_scan, liouvillian_ep_scan
from .tables import ResultTable, write_table

TASKS = ("ep_scan_h", "ep_scan_l", "eigen_sweep", "beta_sweep", "detuning_sweep",
         "thermal_sweep", "single_point", "upb_solve")
ENGINES = ("analytic", "master", "both")
STAT_COLUMNS = ("g2_11", "g2_22", "g2_12", "g3_11", "g3_22", "P10", "P01", "P20", "P11", "P02")
RATE_KEYS = ("eps1", "eps2", "chi", "delta0", "xi", "omega0")
SWEEP_TASKS = ("ep_scan_h", "ep_scan_l", "eigen_sweep", "beta_sweep", "detuning_sweep")


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    count: int
    unit: str = "pi"

    def values(self) -> np.ndarray:
        scale = math.pi if self.unit == "pi" else 1.0
        return np.linspace(self.start, self.stop, self.count) * scale


@dataclass(frozen=True)
class Scenario:
    name: str
    task: str
    params: SystemParams
    grid: GridSpec | None = None
    engine: str = "analytic"
    output_path: str | None = None
    output_format: str = "csv"
    variant: str = "full"
    basis: tuple = ("per_mode", 4, 4)
    evolution: EvolutionOptions = field(default_factory=EvolutionOptions)
    loss_model: str = "gamma_only"
    ep: dict = field(default_factory=dict)
    beta_list: tuple = ()
    nth_grid: tuple = ()
    upb: dict = field(default_factory=dict)
    extra_axis: tuple = ()  # (name, values) for multi-curve figures


# ---------------------------------------------------------------- parsing

def _number(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    return float(value)


def _complex(value, key):
    if isinstance(value, dict) and set(value) <= {"re", "im"}:
        return complex(_number(value.get("re", 0.0), key), _number(value.get("im", 0.0), key))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_number(value[0], key), _number(value[1], key))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(_number(value, key))
    raise ConfigError(key, "expected a number, [re, im] or {re, im}")


def _choice(value, options, key):
    if value not in options:
        raise ConfigError(key, f"must be one of {', '.join(options)}; got {value!r}")
    return value


def parse_params(raw: dict) -> SystemParams:
    """Build SystemParams from a config block, converting SI entries once."""
    if not isinstance(raw, dict):
        raise ConfigError("params", "expected an object")
    raw = dict(raw)
    gamma_si = raw.pop("gamma_si", None)
    if gamma_si is not None:
        gamma_si = _number(gamma_si, "params.gamma_si")
        if gamma_si <= 0:
            raise ConfigError("params.gamma_si", "must be positive")
    for key in RATE_KEYS:
        si = key + "_si"
        if si in raw:
            if key in raw:
                raise ConfigError(f"params.{si}", f"conflicts with params.{key}")
            if gamma_si is None:
                raise ConfigError(f"params.{si}", "SI rates need params.gamma_si")
            v = raw.pop(si)
            raw[key] = ([x / gamma_si for x in v] if isinstance(v, (list, tuple))
                        else {k: x / gamma_si for k, x in v.items()} if isinstance(v, dict)
                        else _number(v, f"params.{si}") / gamma_si)
    kw = {}
    kw["eps1"] = _complex(raw.pop("eps1", [PAPER_EPS1.real, PAPER_EPS1.imag]), "params.eps1")
    kw["eps2"] = _complex(raw.pop("eps2", [PAPER_EPS2.real, PAPER_EPS2.imag]), "params.eps2")
    sigma = raw.pop("sigma", 1)
    if not isinstance(sigma, int) or isinstance(sigma, bool) or sigma < 1:
        raise ConfigError("params.sigma", "must be a positive integer")
    kw["sigma"] = sigma
    if "beta" in raw and "beta_pi" in raw:
        raise ConfigError("params.beta_pi", "give beta or beta_pi, not both")
    if "beta_pi" in raw:
        kw["beta"] = _number(raw.pop("beta_pi"), "params.beta_pi") * math.pi
    elif "beta" in raw:
        kw["beta"] = _number(raw.pop("beta"), "params.beta")
    lam = _number(raw.pop("lambda_si", DEVICE_LAMBDA), "params.lambda_si")
    device = {k: raw.pop(k) for k in ("n2_si", "n0", "veff_si", "q") if k in raw}
    if device:
        if "chi" in raw:
            raise ConfigError("params.n2_si", "device Kerr inputs conflict with params.chi")
        kw["chi"] = _kerr_from_si(device, lam)
    elif "chi" in raw:
        kw["chi"] = _number(raw.pop("chi"), "params.chi")
    else:
        kw["chi"] = CHI_STANDARD
    d0 = raw.pop("delta0", "resonant")
    if d0 == "resonant":
        kw["delta0"] = resonant_delta0(kw["eps1"], kw["eps2"])
    else:
        kw["delta0"] = _number(d0, "params.delta0")
    kw["xi"] = _number(raw.pop("xi", PAPER_XI), "params.xi")
    if "omega0" in raw:
        kw["omega0"] = _number(raw.pop("omega0"), "params.omega0")
    conv = raw.pop("nth_convention", "bose_einstein")
    _choice(conv, ("bose_einstein", "paper_literal"), "params.nth_convention")
    if "temperature_si" in raw:
        if "nth" in raw:
            raise ConfigError("params.temperature_si", "conflicts with params.nth")
        temp = _number(raw.pop("temperature_si"), "params.temperature_si")
        kw["nth"] = _nth(temp, lam, conv, "params.temperature_si")
    else:
        kw["nth"] = _number(raw.pop("nth", 0.0), "params.nth")
    if "gamma" in raw:
        if _number(raw.pop("gamma"), "params.gamma") != 1.0:
            raise ConfigError("params.gamma", "gamma is the rate unit and must be 1")
    if raw:
        bad = sorted(raw)[0]
        raise ConfigError(f"params.{bad}", "unknown key")
    try:
        return SystemParams(**kw)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from exc


def _nth(temp, lam, conv, key):
    try:
        return nth_from_temperature(temp, lam, conv)
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from exc


def _kerr_from_si(raw: dict, lam: float) -> float:
    if "n2_si" not in raw:
        raise ConfigError("params.n2_si", "required with other device Kerr inputs")
    vals = dict(
        lam=lam,
        n2=_number(raw["n2_si"], "params.n2_si"),
        n0=_number(raw.get("n0", DEVICE_N0), "params.n0"),
        veff=_number(raw.get("veff_si", DEVICE_VEFF), "params.veff_si"),
        q=_number(raw.get("q", DEVICE_Q), "params.q"),
    )
    try:
        return kerr_coefficient(**vals)
    except ValueError as exc:
        raise ConfigError("params.n2_si", str(exc)) from exc


def _parse_grid(raw, task) -> GridSpec:
    if not isinstance(raw, dict):
        raise ConfigError("grid", "expected an object with start, stop, count")
    for k in raw:
        if k not in ("start", "stop", "count", "unit"):
            raise ConfigError(f"grid.{k}", "unknown key")
    for k in ("start", "stop", "count"):
        if k not in raw:
            raise ConfigError(f"grid.{k}", "required")
    count = raw["count"]
    if not isinstance(count, int) or isinstance(count, bool) or count < 2:
        raise ConfigError("grid.count", "sweeps need an integer count >= 2")
    default_unit = "gamma" if task == "detuning_sweep" else "pi"
    unit = _choice(raw.get("unit", default_unit), ("pi", "rad", "gamma"), "grid.unit")
    if task == "detuning_sweep" and unit != "gamma":
        raise ConfigError("grid.unit", "detuning grids are in units of gamma")
    if task != "detuning_sweep" and unit == "gamma":
        raise ConfigError("grid.unit", "angle grids take pi or rad")
    return GridSpec(_number(raw["start"], "grid.start"), _number(raw["stop"], "grid.stop"), count, unit)


def _parse_basis(raw) -> tuple:
    if raw is None:
        return ("per_mode", 4, 4)
    if isinstance(raw, dict):
        kind = _choice(raw.get("kind"), ("per_mode", "total_excitation"), "basis.kind")
        n = raw.get("n")
        if kind == "per_mode":
            if not (isinstance(n, list) and len(n) == 2 and all(isinstance(x, int) and x >= 0 for x in n)):
                raise ConfigError("basis.n", "per_mode needs [n1, n2]")
            return ("per_mode", n[0], n[1])
        if not isinstance(n, int) or n < 0:
            raise ConfigError("basis.n", "total_excitation needs an integer")
        return ("total_excitation", n)
    raise ConfigError("basis", "expected {kind, n}")


def make_basis(spec: tuple):
    if spec[0] == "per_mode":
        return per_mode(spec[1], spec[2])
    return total_excitation(spec[1])


def parse_scenario(raw: dict, task: str | None = None, engine: str | None = None) -> Scenario:
    """Validate a config mapping; ``task``/``engine`` override the file's values."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be an object")
    known = {"name", "task", "params", "grid", "engine", "output", "variant", "basis",
             "evolution", "loss_model", "ep", "beta_pi_list", "nth_grid", "temperature_si_grid",
             "upb"}
    for k in raw:
        if k not in known:
            raise ConfigError(k, "unknown key")
    task = _choice(task or raw.get("task"), TASKS, "task")
    engine = _choice(engine or raw.get("engine", "analytic"), ENGINES, "engine")
    params = parse_params(raw.get("params", {}))
    grid = None
    if task in SWEEP_TASKS:
        if "grid" not in raw:
            raise ConfigError("grid", f"task {task} needs a grid")
        grid = _parse_grid(raw["grid"], task)
    out = raw.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("output", "expected {path, format}")
    fmt = _choice(out.get("format", "csv"), ("csv", "json"), "output.format")
    evo = raw.get("evolution", {})
    try:
        evolution = EvolutionOptions(**evo)
    except TypeError as exc:
        raise ConfigError("evolution", str(exc)) from exc
    except ValueError as exc:
        raise ConfigError("evolution", str(exc)) from exc
    beta_list = tuple(_number(b, "beta_pi_list") * math.pi for b in raw.get("beta_pi_list", ()))
    nth_grid = _thermal_grid(raw, params)
    if task == "thermal_sweep":
        if engine == "analytic":
            raise ConfigError("engine", "thermal_sweep needs the master engine")
        if not beta_list:
            raise ConfigError("beta_pi_list", "thermal_sweep needs at least one angle")
        if len(nth_grid) < 2:
            raise ConfigError("nth_grid", "thermal_sweep needs at least 2 points")
    ep = raw.get("ep", {})
    if not isinstance(ep, dict):
        raise ConfigError("ep", "expected an object")
    for k in ep:
        if k not in ("subspace", "gap_tol", "overlap_tol", "sector", "basis_nmax"):
            raise ConfigError(f"ep.{k}", "unknown key")
    upb = raw.get("upb", {})
    if not isinstance(upb, dict):
        raise ConfigError("upb", "expected an object")
    if "mode" in upb:
        _choice(upb["mode"], ("resonant_closed_form", "general_cubic"), "upb.mode")
    if "condition" in upb:
        _choice(upb["condition"], ("imaginary", "real"), "upb.condition")
    return Scenario(
        name=str(raw.get("name", task)),
        task=task,
        params=params,
        grid=grid,
        engine=engine,
        output_path=out.get("path"),
        output_format=fmt,
        variant=_choice(raw.get("variant", "full"), ("full", "approximate"), "variant"),
        basis=_parse_basis(raw.get("basis")),
        evolution=evolution,
        loss_model=_choice(raw.get("loss_model", "gamma_only"), ("gamma_only", "kappa"), "loss_model"),
        ep=dict(ep),
        beta_list=beta_list,
        nth_grid=nth_grid,
        upb=dict(upb),
    )


def _thermal_grid(raw, params) -> tuple:
    if "nth_grid" in raw and "temperature_si_grid" in raw:
        raise ConfigError("temperature_si_grid", "conflicts with nth_grid")
    if "temperature_si_grid" in raw:
        spec = raw["temperature_si_grid"]
        if not isinstance(spec, dict) or "values" not in spec:
            raise ConfigError("temperature_si_grid", "expected {values, convention}")
        conv = _choice(spec.get("convention", "bose_einstein"), ("bose_einstein", "paper_literal"),
                       "temperature_si_grid.convention")
        lam = _number(spec.get("lambda_si", DEVICE_LAMBDA), "temperature_si_grid.lambda_si")
        key = "temperature_si_grid.values"
        return tuple(_nth(_number(t, key), lam, conv, key) for t in spec["values"])
    vals = raw.get("nth_grid", ())
    out = tuple(_number(v, "nth_grid") for v in vals)
    if any(v < 0 for v in out):
        raise ConfigError("nth_grid", "thermal occupations must be >= 0")
    return out


def load_scenario(path: str, task: str | None = None, engine: str | None = None) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_scenario(raw, task, engine)


# ---------------------------------------------------------------- running

def params_echo(p: SystemParams) -> dict:
    d = asdict(p)
    for k in ("eps1", "eps2"):
        d[k] = [p.__getattribute__(k).real, p.__getattribute__(k).imag]
    return {k: d[k] for k in sorted(d)}


def _metadata(sc: Scenario, **extra) -> dict:
    md = dict(
        artifact="epblockade",
        version=__version__,
        scenario=sc.name,
        task=sc.task,
        engine=sc.engine,
        params=params_echo(sc.params),
        generated=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    )
    if sc.grid is not None:
        md["grid"] = asdict(sc.grid)
    if sc.task in ("beta_sweep", "detuning_sweep", "single_point", "thermal_sweep") and sc.engine != "analytic":
        md["basis"] = list(sc.basis)
        md["evolution"] = asdict(sc.evolution)
        md["loss_model"] = sc.loss_model
    if sc.task in ("beta_sweep", "detuning_sweep", "single_point") and sc.engine != "master":
        md["variant"] = sc.variant
    md.update(extra)
    return md


def _master_row(obs: dict) -> dict:
    pr = obs["probabilities"]
    row = {k: obs[k] for k in ("g2_11", "g2_22", "g2_12", "g3_11", "g3_22")}
    for s in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2)):
        row[f"P{s[0]}{s[1]}"] = pr.get(s, 0.0)
    return row


def _analytic_rows(sc: Scenario, axis: str, grid, mapper):
    return sweep(sc.params, axis, grid, sc.variant, mapper=mapper)


def _master_rows(sc: Scenario, axis: str, grid, mapper, trace_log=None):
    basis = make_basis(sc.basis)

    def run(x):
        st = evolve_to_steady(sc.params.with_(**{axis: x}), basis, sc.evolution,
                              loss_model=sc.loss_model, trace_log=trace_log)
        return _master_row(observables(st))

    rows = list(mapper(run, list(grid)))
    upb = upb_angles(sc.params) if axis == "beta" else None
    labels = label_regimes(list(grid), [r["g2_11"] for r in rows], [r["g3_11"] for r in rows], upb)
    for x, r, lab in zip(grid, rows, labels):
        r[axis] = float(x)
        r["regime"] = lab
    return rows


def _stat_table(sc: Scenario, axis: str, grid, mapper, lead=()) -> ResultTable:
    """Analytic/master/both rows over one axis; ``lead`` prepends fixed columns."""
    grid = [float(x) for x in grid]
    lead_cols = [k for k, _ in lead]
    lead_vals = {k: v for k, v in lead}
    cols = lead_cols + [axis]
    extra = {}
    an = me = None
    if sc.engine in ("analytic", "both"):
        an = _analytic_rows(sc, axis, grid, mapper)
        flagged = [r[axis] for r in an if r["poles"]]
        if flagged:
            extra["pole_flags"] = flagged
    if sc.engine in ("master", "both"):
        me = _master_rows(sc, axis, grid, mapper)
    if sc.engine == "analytic":
        cols += list(STAT_COLUMNS) + ["regime"]
        recs = an
    elif sc.engine == "master":
        cols += list(STAT_COLUMNS) + ["regime"]
        recs = me
    else:
        cols += list(STAT_COLUMNS) + ["regime"] + [c + "_me" for c in STAT_COLUMNS] + ["regime_me", "g2_11_reldiff"]
        recs = []
        for a, m in zip(an, me):
            r = dict(a)
            r.update({k + "_me": m[k] for k in list(STAT_COLUMNS) + ["regime"]})
            r["g2_11_reldiff"] = _reldiff(m["g2_11"], a["g2_11"])
            recs.append(r)
    for r in recs:
        r.update(lead_vals)
    return ResultTable.from_dicts(cols, recs, _metadata(sc, **extra))


def _reldiff(x, ref):
    if not (math.isfinite(x) and math.isfinite(ref)) or ref == 0:
        return float("nan")
    return (x - ref) / abs(ref)


def _ep_table(sc: Scenario, mapper) -> ResultTable:
    betas = sc.grid.values()
    ep = sc.ep
    if sc.task == "ep_scan_h":
        kw = {k: ep[k] for k in ("gap_tol", "overlap_tol") if k in ep}
        reports = hamiltonian_ep_scan(sc.params, betas, subspace=ep.get("subspace", 1), **kw)
        cols = ["beta", "reEgap", "imEgap", "overlap", "is_ep"]
        rows = [(r.beta, r.gap.real, r.gap.imag, r.overlap, r.is_ep) for r in reports]
    else:
        kw = {k: ep[k] for k in ("gap_tol", "overlap_tol", "sector") if k in ep}
        basis = total_excitation(ep.get("basis_nmax", 2))
        reports = liouvillian_ep_scan(sc.params, betas, basis=basis, loss_model=sc.loss_model, **kw)
        cols = ["beta", "reLgap", "imLgap", "is_ep"]
        rows = [(r.beta, r.gap.real, r.gap.imag, r.is_ep) for r in reports]
    flagged = [r.beta for r in reports if r.is_ep]
    return ResultTable(cols, rows, _metadata(sc, ep_betas=flagged))


def _eigen_table(sc: Scenario, mapper) -> ResultTable:
    cols = ["beta", "reE1p", "imE1p", "reE1m", "imE1m",
            "reE2p", "imE2p", "reE20", "imE20", "reE2m", "imE2m", "overlap1", "overlap2"]

    def one(b):
        p = sc.params.with_(beta=b)
        s1, s2 = closed_form_eigensystem(p, 1), closed_form_eigensystem(p, 2)
        e1p, v1p = s1.pair("+")
        e1m, v1m = s1.pair("-")
        e2p, v2p = s2.pair("+")
        e20, _ = s2.pair("0")
        e2m, v2m = s2.pair("-")
        ov = lambda u, v: float(abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v)))
        return (float(b), e1p.real, e1p.imag, e1m.real, e1m.imag, e2p.real, e2p.imag,
                e20.real, e20.imag, e2m.real, e2m.imag, ov(v1p, v1m), ov(v2p, v2m))

    return ResultTable(cols, list(mapper(one, [float(b) for b in sc.grid.values()])), _metadata(sc))


def _thermal_table(sc: Scenario, mapper) -> ResultTable:
    rows, cross = thermal_sweep(sc.params, sc.nth_grid, sc.beta_list, make_basis(sc.basis),
                                sc.evolution, sc.loss_model, mapper=mapper)
    crossings = [[b, cross[b]] for b in sc.beta_list]
    return ResultTable.from_dicts(["beta", "nth", "g2_11"], rows,
                                  _metadata(sc, crossings=crossings, nth_grid=list(sc.nth_grid)))


def _single_point(sc: Scenario, trace_log=None) -> ResultTable:
    p = sc.params
    recs = {}
    if sc.engine in ("analytic", "both"):
        amps = steady_amplitudes(p)
        pr = probabilities(amps)
        cs = correlations(pr, sc.variant)
        row = cs.as_dict()
        row.update({f"P{s[0]}{s[1]}": pr[s] for s in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))})
        recs["an"] = row
    if sc.engine in ("master", "both"):
        st = evolve_to_steady(p, make_basis(sc.basis), sc.evolution, loss_model=sc.loss_model,
                              trace_log=trace_log)
        recs["me"] = _master_row(observables(st))
    cols = ["beta", "delta0"]
    rec = dict(beta=p.beta, delta0=p.delta0)
    if sc.engine == "both":
        cols += list(STAT_COLUMNS) + [c + "_me" for c in STAT_COLUMNS] + ["g2_11_reldiff"]
        rec.update(recs["an"])
        rec.update({k + "_me": v for k, v in recs["me"].items()})
        rec["g2_11_reldiff"] = _reldiff(recs["me"]["g2_11"], recs["an"]["g2_11"])
    else:
        cols += list(STAT_COLUMNS)
        rec.update(recs["an" if sc.engine == "analytic" else "me"])
    return ResultTable.from_dicts(cols, [rec], _metadata(sc))


def _upb_table(sc: Scenario) -> ResultTable:
    mode = sc.upb.get("mode", "resonant_closed_form")
    if mode == "general_cubic":
        sols = upb_angles(sc.params, mode)
        rows = [(s.beta, s.re_delta, s.delta0) for s in sols]
        return ResultTable(["beta", "re_delta", "delta0"], rows, _metadata(sc, upb_mode=mode))
    cond = sc.upb.get("condition", "imaginary")
    betas = upb_angles(sc.params, mode, cond)
    return ResultTable(["beta", "beta_pi"], [(b, b / math.pi) for b in betas],
                       _metadata(sc, upb_mode=mode, upb_condition=cond))


def run_scenario(sc: Scenario, threads: int = 1, trace_log: list | None = None) -> ResultTable:
    """Dispatch one scenario; sweep points go through a pool of ``threads`` workers."""
    if threads < 1:
        raise ConfigError("--threads", "must be >= 1")
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    mapper = pool.map if pool else map
    try:
        if sc.task in ("ep_scan_h", "ep_scan_l"):
            return _ep_table(sc, mapper)
        if sc.task == "eigen_sweep":
            return _eigen_table(sc, mapper)
        if sc.task == "beta_sweep":
            if sc.extra_axis:
                return _multi_curve(sc, "beta", mapper)
            return _stat_table(sc, "beta", sc.grid.values(), mapper)
        if sc.task == "detuning_sweep":
            if sc.extra_axis:
                return _multi_curve(sc, "delta0", mapper)
            return _stat_table(sc, "delta0", sc.grid.values(), mapper)
        if sc.task == "thermal_sweep":
            return _thermal_table(sc, mapper)
        if sc.task == "single_point":
            return _single_point(sc, trace_log)
        return _upb_table(sc)
    except (NonConvergence, TrackingLost, StepUnstable) as exc:
        raise type(exc)(f"scenario {sc.name!r}: {exc}") from exc
    finally:
        if pool:
            pool.shutdown()


def _multi_curve(sc: Scenario, axis: str, mapper) -> ResultTable:
    name, values = sc.extra_axis
    parts = []
    for v in values:
        sub = replace(sc, params=sc.params.with_(**{name: v}), extra_axis=())
        parts.append(_stat_table(sub, axis, sc.grid.values(), mapper, lead=((name, float(v)),)))
    rows = [r for t in parts for r in t.rows]
    md = _metadata(sc, curves={name: [float(v) for v in values]})
    return ResultTable(parts[0].columns, rows, md)


# ---------------------------------------------------------------- figures

def _paper(**kw) -> SystemParams:
    base = dict(eps1=PAPER_EPS1, eps2=PAPER_EPS2, sigma=1, xi=PAPER_XI,
                delta0=resonant_delta0(PAPER_EPS1, PAPER_EPS2))
    base.update(kw)
    return SystemParams(**base)


def figure_scenario(figure_id: str) -> Scenario:
    """Canned scenario for one figure, at desk-scale grids."""
    full = GridSpec(0.0, 2.0, 201)
    if figure_id == "fig1b":
        return Scenario("fig1b", "beta_sweep", _paper(chi=CHI_STRONG), full)
    if figure_id == "fig2a":
        return Scenario("fig2a", "beta_sweep", _paper(chi=CHI_STRONG), GridSpec(0.0, 2.0, 41), engine="both")
    if figure_id == "fig2b":
        return Scenario("fig2b", "beta_sweep", _paper(chi=CHI_STRONG), full)
    if figure_id == "fig3a":
        return Scenario("fig3a", "detuning_sweep", _paper(chi=CHI_STRONG), GridSpec(-8.0, 2.0, 201, "gamma"),
                        extra_axis=("beta", tuple(np.array([0.5, 0.75, 1.0, 1.25, 1.5]) * math.pi)))
    if figure_id == "fig3b":
        return Scenario("fig3b", "detuning_sweep", _paper(chi=CHI_STRONG), GridSpec(-8.0, 2.0, 101, "gamma"),
                        extra_axis=("beta", tuple(np.linspace(0.0, 2.0, 41) * math.pi)))
    if figure_id == "figS1":
        return Scenario("figS1", "eigen_sweep", _paper(chi=CHI_STANDARD), full)
    if figure_id == "figS2":
        return Scenario("figS2", "ep_scan_l", _paper(chi=CHI_STANDARD), GridSpec(0.0, 2.0, 400))
    if figure_id == "figS6":
        return Scenario("figS6", "beta_sweep", _paper(chi=CHI_STANDARD), full)
    if figure_id == "figS7":
        return Scenario("figS7", "detuning_sweep", _paper(chi=CHI_WEAK), GridSpec(-8.0, 4.0, 241, "gamma"),
                        extra_axis=("beta", tuple(np.array([0.5, 1.0]) * math.pi)))
    if figure_id == "figS8":
        return Scenario("figS8", "thermal_sweep", _paper(chi=CHI_STANDARD), engine="master",
                        beta_list=(0.5 * math.pi, 0.6 * math.pi, math.pi),
                        nth_grid=(0.0, 0.005, 0.01, 0.02, 0.03, 0.05, 0.08, 0.1, 0.12, 0.15, 0.3, 0.5))
    raise UnknownFigure(figure_id)


FIGURES = ("fig1b", "fig2a", "fig2b", "fig3a", "fig3b", "figS1", "figS2", "figS6", "figS7", "figS8")


def reproduce_figure(figure_id: str, threads: int = 1) -> ResultTable:
    return run_scenario(figure_scenario(figure_id), threads)


# ---------------------------------------------------------------- entry point

def _dump_operators(sc: Scenario, path: str) -> None:
    basis = make_basis(sc.basis)
    hp, hm, jumps = system_operators(sc.params, basis, "hybrid", sc.loss_model)
    doc = dict(states=[list(s) for s in basis.states], h_plus=dump_operator(hp),
               h_minus=dump_operator(hm), jumps=[dump_operator(j) for j in jumps],
               params=params_echo(sc.params))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _write_trace(rows, path):
    tab = ResultTable(["t", "trace", "purity", "mean_m", "mean_n"], rows)
    write_table(tab, path)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epblockade", description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="scenario JSON file")
    src.add_argument("--figure", choices=FIGURES, help="run a canned figure scenario")
    ap.add_argument("--task", choices=TASKS, help="override the config's task")
    ap.add_argument("--out", help="output path ('-' or omitted: stdout unless the config names one)")
    ap.add_argument("--format", choices=("csv", "json"), help="override the output format")
    ap.add_argument("--engine", choices=ENGINES, help="override the config's engine")
    ap.add_argument("--threads", type=int, default=1, help="sweep worker count")
    ap.add_argument("--dump-operators", metavar="PATH", help="write H+, H- and jump operators as JSON")
    ap.add_argument("--trace-log", metavar="PATH", help="write the evolution trajectory CSV")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            sc = load_scenario(args.config, args.task, args.engine)
        else:
            sc = figure_scenario(args.figure)
            if args.task:
                raise ConfigError("--task", "cannot override a figure's task")
            if args.engine:
                if sc.task == "thermal_sweep" and args.engine == "analytic":
                    raise ConfigError("--engine", "thermal_sweep needs the master engine")
                sc = replace(sc, engine=args.engine)
        if args.format:
            sc = replace(sc, output_format=args.format)
        if args.dump_operators:
            _dump_operators(sc, args.dump_operators)
        log = [] if args.trace_log else None
        table = run_scenario(sc, args.threads, log)
        if args.trace_log:
            _write_trace(log, args.trace_log)
        write_table(table, args.out or sc.output_path, sc.output_format)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergence, TrackingLost, StepUnstable) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except EpBlockadeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
