"""The nine acceptance criteria, each at its stated tolerance.

Every test records one verdict line; the terminal summary prints them as
PASS/FAIL after the run.
"""

import math
import time
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _verdicts import record
from epblockade.analytic import (STATES, linear_solve_amplitudes, point_statistics, steady_amplitudes,
                                 sweep, upb_angles)
from epblockade.cli import figure_scenario, run_scenario
from epblockade.errors import PoleProximity
from epblockade.hilbert import mode_operator, per_mode, total_excitation
from epblockade.master import evolve_to_steady, observables, thermal_sweep
from epblockade.params import CHI_STANDARD, CHI_STRONG, SystemParams, paper_params
from epblockade.spectra import hamiltonian_ep_scan, liouvillian_ep_scan

PI = math.pi
slow = pytest.mark.slow


def _within(x, target, rel):
    return abs(x - target) <= rel * abs(target)


def _factor2(x, target):
    return target / 2 <= x <= 2 * target


def test_c1_ep_location():
    t0 = time.perf_counter()
    reps = hamiltonian_ep_scan(paper_params(), np.linspace(0, 2 * PI, 720, endpoint=False))
    elapsed = time.perf_counter() - t0
    flagged = [r for r in reps if r.is_ep]
    near = {t: [r for r in flagged if abs(r.beta / PI - t) < 0.002] for t in (0.496, 1.496)}
    located = all(near.values())
    overlap = min(max(r.overlap for r in hits) for hits in near.values()) if located else float("nan")
    two = hamiltonian_ep_scan(paper_params(), np.linspace(0, 2 * PI, 720, endpoint=False), subspace=2)
    overlap2 = max((r.overlap for r in two if r.is_ep), default=float("nan"))
    ok = located and overlap > 0.99 and elapsed < 5
    where = ", ".join(f"{r.beta / PI:.4f}pi" for r in flagged)
    record(1, ok, f"flags {where}; overlap {overlap:.3f} (needs > 0.99; 2-photon block {overlap2:.3f}); "
                  f"{elapsed:.2f}s")
    assert located, "EPs not flagged near 0.496pi and 1.496pi"
    assert overlap > 0.99, f"eigenvector overlap at the flagged EPs is {overlap:.3f}"
    assert elapsed < 5


def test_c2_hep_lep_agreement():
    betas = np.linspace(0, 2 * PI, 400, endpoint=False)
    t0 = time.perf_counter()
    hep = [r.beta for r in hamiltonian_ep_scan(paper_params(), betas) if r.is_ep]
    lep = [r.beta for r in liouvillian_ep_scan(paper_params(), betas, basis=total_excitation(2)) if r.is_ep]
    elapsed = time.perf_counter() - t0
    gap = lambda a, pts: min(abs(a - b) for b in pts) / PI if pts else float("inf")
    worst = max([gap(b, lep) for b in hep] + [gap(b, hep) for b in lep], default=float("inf"))
    ok = bool(hep) and worst < 0.01 and elapsed < 120
    record(2, ok, f"HEP {[round(b / PI, 4) for b in hep]}pi, LEP {[round(b / PI, 4) for b in lep]}pi; "
                  f"max mismatch {worst:.5f}pi; {elapsed:.1f}s")
    assert ok


def test_c3_amplitude_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PoleProximity)
        for _ in range(200):
            p = SystemParams(eps1=complex(rng.uniform(0.5, 2), rng.uniform(-0.3, 0)),
                             eps2=complex(rng.uniform(0.5, 2), rng.uniform(-0.3, 0)),
                             beta=rng.uniform(0, 2 * PI), chi=rng.uniform(0, 25),
                             delta0=rng.uniform(-10, 10), xi=rng.uniform(0.01, 0.5))
            cf, ls = steady_amplitudes(p), linear_solve_amplitudes(p)
            worst = max(worst, max(abs(cf[s] - ls[s]) / abs(ls[s]) for s in STATES))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 10
    record(3, ok, f"worst relative amplitude error {worst:.2e} over 200 draws; {elapsed:.2f}s")
    assert ok


@slow
def test_c4_analytic_master_agreement():
    t0 = time.perf_counter()
    tab = run_scenario(figure_scenario("fig2a"))
    elapsed = time.perf_counter() - t0
    poles = set(tab.metadata.get("pole_flags", []))
    pairs = [(b, d) for b, d in zip(tab.column("beta"), tab.column("g2_11_reldiff")) if b not in poles]
    b_worst, d_worst = max(pairs, key=lambda x: abs(x[1]))
    within = sum(abs(d) < 0.05 for _, d in pairs)
    ok = abs(d_worst) < 0.05 and elapsed < 600
    record(4, ok, f"{within}/{len(pairs)} angles within 5% ({len(poles)} pole-flagged); worst "
                  f"{d_worst:+.1%} at {b_worst / PI:.2f}pi; {elapsed:.0f}s")
    assert ok, f"analytic and master g2_11 differ by {d_worst:+.1%} at beta = {b_worst / PI:.2f}pi"


def test_c5_upb_angles():
    t0 = time.perf_counter()
    p = paper_params()
    got = upb_angles(p)
    c20 = lambda b: abs(steady_amplitudes(p.with_(beta=b))[(2, 0)])
    ratios = [min(c20(b + s * 0.05 * PI) for s in (-1, 1)) / c20(b) for b in got]
    elapsed = time.perf_counter() - t0
    targets = [0.4045, 0.5955, 1.4045, 1.5955]
    located = len(got) == 4 and all(abs(b / PI - t) < 1e-3 for b, t in zip(got, targets))
    ok = located and min(ratios) >= 100 and elapsed < 1
    real = [min(c20(b + s * 0.05 * PI) for s in (-1, 1)) / c20(b) for b in upb_angles(p, condition="real")]
    cubic = upb_angles(p, "general_cubic")[0]
    q = p.with_(beta=cubic.beta, delta0=cubic.delta0)
    c20q = lambda b: abs(steady_amplitudes(q.with_(beta=b))[(2, 0)])
    cubic_ratio = min(c20q(cubic.beta + s * 0.05 * PI) for s in (-1, 1)) / c20q(cubic.beta)
    record(5, ok, f"angles {[round(b / PI, 4) for b in got]}pi; |C20| suppression vs +-0.05pi "
                  f"{min(ratios):.1f}x (needs >= 100x); real-part condition {min(real):.1f}x; "
                  f"general cubic (delta0 retuned) {cubic_ratio:.1e}x; {elapsed:.3f}s")
    assert located
    assert min(ratios) >= 100, f"C20 suppression only {min(ratios):.1f}x"


def test_c6_regime_magnitudes():
    t0 = time.perf_counter()
    p = paper_params(chi=CHI_STANDARD)
    _, half = point_statistics(p.with_(beta=PI / 2))
    _, full = point_statistics(p.with_(beta=PI))
    checks = [("g2_11(pi/2)", half.g2_11, 0.014, 0.2), ("g3_11(pi/2)", half.g3_11, 5e-5, 0.5),
              ("g2_11(pi)", full.g2_11, 33.9, 0.1), ("g3_11(pi)", full.g3_11, 199.8, 0.1),
              ("g2_22(pi/2)", half.g2_22, 0.004, 0.2)]
    elapsed = time.perf_counter() - t0
    me = observables(evolve_to_steady(p.with_(beta=PI), per_mode(4, 4)))
    parts = [f"{name} {v:.4g} ({v / t - 1:+.0%}{'' if _within(v, t, r) else ' FAIL'})"
             for name, v, t, r in checks]
    ok = all(_within(v, t, r) for _, v, t, r in checks) and elapsed < 60
    record(6, ok, ", ".join(parts) + f"; master at pi: g2 {me['g2_11']:.3g}, g3 {me['g3_11']:.4g}")
    bad = [name for name, v, t, r in checks if not _within(v, t, r)]
    assert not bad, f"outside tolerance: {bad}"


def test_c7_tunable_blockade():
    t0 = time.perf_counter()
    grid = np.linspace(-8, 2, 201)
    rows = sweep(paper_params(chi=CHI_STRONG, beta=PI), "delta0", grid)
    elapsed = time.perf_counter() - t0
    g = [r["g2_11"] for r in rows]
    minima = [(grid[i], g[i]) for i in range(1, len(g) - 1) if g[i] < g[i - 1] and g[i] < g[i + 1]]
    near = lambda x0: min(minima, key=lambda m: abs(m[0] - x0))
    (x6, g6), (x0, g0) = near(-6), near(0)
    located = abs(x6 + 6) < 1 and abs(x0) < 1
    as_stated = located and g6 <= 2 * 0.0036 and g0 <= 2 * 0.02
    swapped = located and g6 <= 2 * 0.02 and g0 <= 2 * 0.0036
    ok = as_stated and elapsed < 120
    record(7, ok, f"minima g2 {g6:.4f} at {x6:+.2f} and {g0:.4f} at {x0:+.2f}; pairing 0.0036@-6, 0.02@0 "
                  f"{'holds' if as_stated else 'fails'}; swapped pairing {'holds' if swapped else 'fails'}; "
                  f"{elapsed:.2f}s")
    assert located
    assert g6 <= 2 * 0.0036, f"g2 minimum near -6 is {g6:.4f}"
    assert g0 <= 2 * 0.02


THERMAL_BETAS = (0.5 * PI, 0.6 * PI, PI)
THERMAL_GRID = (0.0, 0.005, 0.01, 0.02, 0.03, 0.05, 0.08, 0.1, 0.12, 0.15, 0.3, 0.5)


@pytest.fixture(scope="module")
def thermal():
    t0 = time.perf_counter()
    rows, cross = thermal_sweep(paper_params(chi=CHI_STANDARD), THERMAL_GRID, THERMAL_BETAS)
    return rows, cross, time.perf_counter() - t0


@slow
def test_c8_thermal_crossings(thermal):
    _, cross, elapsed = thermal
    targets = (0.11, 0.03, 0.003)
    # occupations in the evolution are Bose-Einstein; the literal label of the same
    # temperature is exp(-x) = n / (1 + n)
    conventions = {"bose_einstein": [cross[b] for b in THERMAL_BETAS]}
    conventions["paper_literal"] = [None if n is None else n / (1 + n) for n in conventions["bose_einstein"]]
    verdicts = {}
    for name, vals in conventions.items():
        defined = all(v is not None for v in vals)
        ordered = defined and vals[0] > vals[1] > vals[2]
        close = defined and all(_factor2(v, t) for v, t in zip(vals, targets))
        verdicts[name] = (ordered and close, vals)
    ok = any(v for v, _ in verdicts.values()) and elapsed < 600
    text = "; ".join(f"{k}: " + ", ".join("none" if v is None else f"{v:.4f}" for v in vals)
                     + (" ok" if good else " fails") for k, (good, vals) in verdicts.items())
    record(8, ok, f"crossings at 0.5/0.6/1.0 pi {text}; sweep {elapsed:.0f}s")
    assert ok, f"no convention reproduces 0.11 > 0.03 > 0.003 within factor 2: {text}"


@slow
def test_c8_thermal_limit(thermal):
    rows, _, _ = thermal
    top = [r["g2_11"] for r in rows if r["nth"] == 0.5]
    ok = len(top) == 3 and all(abs(g - 2) <= 0.15 for g in top)
    record(8, ok, "g2_11 at nth=0.5: " + ", ".join(f"{g:.3f}" for g in top) + " (needs 2 +- 0.15)")
    assert ok


def _attempt(n, label, fn):
    t0 = time.perf_counter()
    try:
        fn()
    except AssertionError:
        record(n, False, f"{label} failed ({time.perf_counter() - t0:.1f}s)")
        raise
    record(n, True, f"{label} ok ({time.perf_counter() - t0:.1f}s)")


def test_c9_coherent_state():
    @settings(max_examples=6, deadline=None, database=None)
    @given(st.floats(0.05, 0.4), st.floats(-3, 3))
    def check(xi, d0):
        b = per_mode(10, 0)
        s = evolve_to_steady(SystemParams(eps1=0, eps2=0, chi=0, xi=xi, delta0=d0), b)
        s.check()
        alpha = np.trace(s.rho @ mode_operator(b, "cw", "annihilate"))
        assert abs(abs(alpha) - xi / abs(d0 - 0.5j)) < 1e-4
        assert abs(observables(s)["g2_11"] - 1) < 1e-3

    _attempt(9, "coherent g2 = 1", check)


def test_c9_vacuum_invariance():
    @settings(max_examples=5, deadline=None, database=None)
    @given(st.floats(0, 2 * PI), st.floats(0, 20), st.floats(-5, 5))
    def check(beta, chi, d0):
        b = per_mode(2, 2)
        s = evolve_to_steady(paper_params(beta=beta, chi=chi, delta0=d0, xi=0.0), b)
        s.check()
        assert abs(s.rho[0, 0] - 1) < 1e-12 and np.abs(s.rho).sum() - 1 < 1e-12

    _attempt(9, "vacuum invariance", check)


@slow
def test_c9_cutoff_insensitivity():
    def check():
        for beta in (0.5 * PI, PI):
            p = paper_params(beta=beta)
            a, b = evolve_to_steady(p, per_mode(4, 4)), evolve_to_steady(p, per_mode(6, 6))
            a.check()
            b.check()
            ga, gb = observables(a)["g2_11"], observables(b)["g2_11"]
            assert abs(ga - gb) / gb < 0.005, f"cutoff changes g2_11 by {abs(ga - gb) / gb:.2%}"

    _attempt(9, "cutoff (4,4) vs (6,6) and state invariants", check)
