"""Weak-drive closed forms: amplitudes, probabilities, correlations, UPB/PIT angles.

Amplitudes C_mn solve the effective-Hamiltonian steady state truncated at three
photons with C00 = 1 and drive-induced lowering neglected.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._numerics import stencil_extremum
from .errors import PoleProximity
from .hilbert import build_hamiltonian, total_excitation
from .params import SystemParams, normalize_angle
from .spectra import closed_form_eigensystem

STATES = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3))
POLE_TOL = 1e-9
SQ2, SQ3, SQ6 = math.sqrt(2.0), math.sqrt(3.0), math.sqrt(6.0)
INF = float("inf")


@dataclass(frozen=True)
class AmplitudeSet:
    c: dict
    auxiliaries: dict
    poles: tuple = ()

    def __getitem__(self, key):
        return self.c[key]


@dataclass(frozen=True)
class ProbabilitySet:
    p: dict
    normalization: float

    def __getitem__(self, key):
        return self.p[key]

    def marginal(self, mode: str = "cw") -> np.ndarray:
        k = 0 if mode == "cw" else 1
        top = max(s[k] for s in self.p)
        out = np.zeros(top + 1)
        for s, v in self.p.items():
            out[s[k]] += v
        return out


@dataclass(frozen=True)
class CorrelationSet:
    g2_11: float
    g2_22: float
    g2_12: float
    g3_11: float
    g3_22: float
    variant: str
    flagged: tuple = ()

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("g2_11", "g2_22", "g2_12", "g3_11", "g3_22")}


@dataclass(frozen=True)
class RegimeLabel:
    label: str
    evidence: dict = field(default_factory=dict)
    annotation: str | None = None

    @property
    def display(self) -> str:
        return "UPB" if self.annotation == "interference" else self.label


class _PoleGuard:
    def __init__(self):
        self.hits = []

    def __call__(self, name, den):
        if abs(den) < POLE_TOL:
            self.hits.append(name)
            warnings.warn(f"denominator {name} = {den:.3e} near a pole", PoleProximity, stacklevel=3)
        return den


def steady_amplitudes(params: SystemParams) -> AmplitudeSet:
    r = params.rates
    chi, xi = params.chi, params.xi
    j21, jj = r.j21, r.jj
    d1, d2, d3, d4 = r.delta1, r.delta2, r.delta3, r.delta4
    eta1 = 4 * jj - d1 * d1
    eta2 = 4 * jj - d1 * d2
    eta3 = 4 * jj - d3 * d4
    mu = 16 * jj * d3 * d3 - eta3 * eta3
    guard = _PoleGuard()
    for name, den in (("eta1", eta1), ("eta2", eta2), ("eta3", eta3), ("mu", mu),
                      ("delta2", d2), ("delta3", d3)):
        guard(name, den)
    g1 = (d1 * d1 * eta3 + chi * (4 * jj * eta3 + mu) / d2
          - d3 * (d1 + d2) * (4 * jj * d3 - d2 * eta3) / d2)
    g2 = d3 * eta3 + 2 * d3 * d4 * (4 * chi + d4) - d3 * (8 * jj * d1 + d1 * eta3) / d2
    e12 = eta1 * eta2
    c = {(0, 0): 1 + 0j}
    c[1, 0] = 2 * xi * d1 / eta1
    c[0, 1] = -4 * xi * j21 / eta1
    c[2, 0] = 2 * SQ2 * xi**2 * (d1 * d1 + 4 * jj * chi / d2) / e12
    c[1, 1] = -4 * j21 * xi**2 * (d1 + d2) / e12
    c[0, 2] = 4 * SQ2 * j21**2 * xi**2 * (d1 / d2 + 1) / e12
    c[3, 0] = -4 * SQ6 * xi**3 * (4 * jj * g1 + mu * d1 * d1) / (3 * mu * e12 * d3)
    c[2, 1] = 8 * SQ2 * j21 * xi**3 * (g1 - chi * mu / d2) / (mu * e12)
    c[1, 2] = 8 * SQ2 * j21**2 * xi**3 * g2 / (mu * e12)
    c[0, 3] = -2 * j21 / (SQ3 * d3) * c[1, 2]
    aux = dict(eta1=eta1, eta2=eta2, eta3=eta3, mu=mu, Gamma1=g1, Gamma2=g2)
    return AmplitudeSet({s: complex(c[s]) for s in STATES}, aux, tuple(guard.hits))


def linear_solve_amplitudes(params: SystemParams) -> AmplitudeSet:
    """Same amplitudes from a dense solve of the truncated steady-state equations."""
    basis = total_excitation(3)
    h = build_hamiltonian(params, basis, "effective")
    tot = basis.total_numbers()
    h[tot[:, None] < tot[None, :]] = 0.0  # drop drive-induced lowering
    sol = np.linalg.solve(h[1:, 1:], -h[1:, 0])
    c = {(0, 0): 1 + 0j}
    c.update({s: complex(v) for s, v in zip(basis.states[1:], sol)})
    return AmplitudeSet({s: c[s] for s in STATES}, {})


def probabilities(amps: AmplitudeSet) -> ProbabilitySet:
    w = {s: abs(v) ** 2 for s, v in amps.c.items()}
    norm = math.fsum(w.values())
    return ProbabilitySet({s: v / norm for s, v in w.items()}, norm)


def _ratio(num, den, name, flagged):
    if den <= 0:
        flagged.append(name)
        return INF
    return num / den


def correlations(probs: ProbabilitySet, variant: str = "full") -> CorrelationSet:
    """Equal-time correlations from photon-number probabilities.

    ``full`` uses factorial moments over every state; ``approximate`` keeps only
    the leading one-, two- and three-photon terms.
    """
    p = probs.p
    flagged = []
    if variant == "full":
        w11 = math.fsum(m * v for (m, n), v in p.items())
        w22 = math.fsum(n * v for (m, n), v in p.items())
        f2m = math.fsum(m * (m - 1) * v for (m, n), v in p.items())
        f2n = math.fsum(n * (n - 1) * v for (m, n), v in p.items())
        f3m = math.fsum(m * (m - 1) * (m - 2) * v for (m, n), v in p.items())
        f3n = math.fsum(n * (n - 1) * (n - 2) * v for (m, n), v in p.items())
        fmn = math.fsum(m * n * v for (m, n), v in p.items())
        vals = (_ratio(f2m, w11**2, "g2_11", flagged), _ratio(f2n, w22**2, "g2_22", flagged),
                _ratio(fmn, w11 * w22, "g2_12", flagged), _ratio(f3m, w11**3, "g3_11", flagged),
                _ratio(f3n, w22**3, "g3_22", flagged))
    elif variant == "approximate":
        g = lambda s: p.get(s, 0.0)  # noqa: E731
        vals = (_ratio(2 * g((2, 0)), g((1, 0)) ** 2, "g2_11", flagged),
                _ratio(2 * g((0, 2)), g((0, 1)) ** 2, "g2_22", flagged),
                _ratio(g((1, 1)), g((1, 0)) * g((0, 1)), "g2_12", flagged),
                _ratio(6 * g((3, 0)), g((1, 0)) ** 3, "g3_11", flagged),
                _ratio(6 * g((0, 3)), g((0, 1)) ** 3, "g3_22", flagged))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return CorrelationSet(*vals, variant=variant, flagged=tuple(flagged))


def g2_two_photon(probs: ProbabilitySet) -> float:
    """g2_11 with the state space cut at two photons."""
    p = probs.p
    p2 = {s: v for s, v in p.items() if sum(s) <= 2}
    tot = math.fsum(p2.values())
    w = math.fsum(m * v for (m, n), v in p2.items()) / tot
    return 2 * p2[(2, 0)] / tot / w**2 if w > 0 else INF


def g2_closed_form(params: SystemParams) -> float:
    """Leading-order g2_11 as the ratio of squared moduli."""
    r = params.rates
    d1, d2 = r.delta1, r.delta2
    eta1, eta2 = 4 * r.jj - d1 * d1, 4 * r.jj - d1 * d2
    num = abs(eta1) ** 2 * abs(d1 * d1 + 4 * r.jj * params.chi / d2) ** 2
    return num / (abs(d1) ** 4 * abs(eta2) ** 2)


def mean_photon_scale(params: SystemParams, norm: str = "kappa") -> float:
    if norm == "kappa":
        return params.xi**2 / params.rates.kappa**2
    if norm == "gamma":
        return params.xi**2 / params.gamma**2
    raise ValueError(f"unknown normalization {norm!r}")


def excitation_spectrum(params: SystemParams, delta0_grid, mode: str = "cw",
                        norm: str = "kappa") -> np.ndarray:
    """Rows (delta0, S) with S the mean photon number over xi^2/kappa^2."""
    k = 0 if mode == "cw" else 1
    n0 = mean_photon_scale(params, norm)
    rows = []
    for d0 in delta0_grid:
        pr = probabilities(steady_amplitudes(params.with_(delta0=float(d0))))
        rows.append((float(d0), math.fsum(s[k] * v for s, v in pr.p.items()) / n0))
    return np.array(rows)


@dataclass(frozen=True)
class UpbSolution:
    beta: float
    re_delta: float
    delta0: float


def _eps_moments(params: SystemParams):
    e1, e2 = params.eps1, params.eps2
    dd1 = (e1 * e1 + e2 * e2).real
    dd2 = 2 * (e1 * e2).real
    dd3 = (e1 * e1 + e2 * e2).imag
    dd4 = 2 * (e1 * e2).imag
    return dd1, dd2, dd3, dd4


def _betas_from_cos(c: float, sigma: int) -> list[float]:
    if not -1.0 <= c <= 1.0:
        return []
    half = math.acos(c) / (2 * sigma)
    out = set()
    for p in range(-1, 2 * sigma + 2):
        for b in (p * math.pi / sigma + half, p * math.pi / sigma - half):
            if -1e-12 <= b < 2 * math.pi - 1e-12:
                out.add(round(normalize_angle(b), 14))
    return sorted(out)


def upb_angles(params: SystemParams, mode: str = "resonant_closed_form",
               condition: str = "imaginary"):
    """Angles where the two-photon CW amplitude is suppressed.

    ``resonant_closed_form`` (Re Delta = 0) cancels one quadrature of the
    C20 numerator: ``imaginary`` involves chi, ``real`` is chi-independent.
    ``general_cubic`` cancels both by also solving for Re Delta and returns
    UpbSolution records.
    """
    kappa = params.rates.kappa
    chi = params.chi
    dd1, dd2, dd3, dd4 = _eps_moments(params)
    if mode == "resonant_closed_form":
        if condition == "real":
            if dd2 == 0:
                return []
            c = (kappa**2 / 2 - dd1) / dd2
        elif condition == "imaginary":
            if dd4 == 0 or chi == 0:
                return []
            c = -(dd3 + kappa**3 / (4 * chi)) / dd4
        else:
            raise ValueError(f"unknown condition {condition!r}")
        return _betas_from_cos(c, params.sigma)
    if mode != "general_cubic":
        raise ValueError(f"unknown mode {mode!r}")
    if dd4 == 0 or chi == 0:
        return []
    a2 = chi + 3 * kappa * dd2 / (2 * dd4)
    a1 = -0.75 * kappa**2 + chi * kappa * dd2 / dd4
    a0 = chi * (dd1 - dd2 * dd3 / dd4) / 2 - kappa**3 * dd2 / (8 * dd4) - chi * kappa**2 / 4
    roots = np.roots([1.0, a2, a1, a0])
    scale = max(1.0, np.abs(roots).max())
    shift = (params.eps1 + params.eps2).real
    out = []
    for z in roots:
        if abs(z.imag) > 1e-9 * scale:
            continue
        rd = float(z.real)
        c = (3 * kappa * rd**2 + 2 * chi * kappa * rd - chi * dd3 - kappa**3 / 4) / (chi * dd4)
        out.extend(UpbSolution(b, rd, rd - shift) for b in _betas_from_cos(c, params.sigma))
    return sorted(out, key=lambda s: (s.beta, s.re_delta))


def pit_angles(sigma: int) -> list[float]:
    if sigma < 1:
        raise ValueError("sigma must be >= 1")
    return [p * math.pi / sigma for p in range(2 * sigma)]


def transition_elements(params: SystemParams) -> dict:
    """Squared drive matrix elements from psi_1^(-/+) to psi_2^s (u^s / w^s)."""
    one = closed_form_eigensystem(params, 1)
    two = closed_form_eigensystem(params, 2)
    out = {}
    for lo_label, key in (("-", "u"), ("+", "w")):
        v1 = one.pair(lo_label)[1]
        c01, c10 = v1[0], v1[1]
        for s in ("0", "+", "-"):
            v2 = two.pair(s)[1]
            c11, c20 = v2[1], v2[2]
            amp = c01 * np.conj(c11) + SQ2 * c10 * np.conj(c20)
            out[f"{key}{s}"] = float(params.xi**2 * abs(amp) ** 2)
    return out


def relative_distribution(marginal, log_floor: float = -700.0) -> list:
    """R(m) = (P_m - Poisson_m)/Poisson_m for the same mean; None where Poisson underflows."""
    pm = np.asarray(marginal, dtype=float)
    mean = float(np.dot(np.arange(len(pm)), pm))
    if not mean > 0:
        raise ZeroDivisionError("mean photon number is zero")
    out = []
    for m, p in enumerate(pm):
        logp = m * math.log(mean) - mean - math.lgamma(m + 1)
        if logp < log_floor:
            out.append(None)
            continue
        poisson = math.exp(logp)
        out.append((p - poisson) / poisson)
    return out


def classify_regime(g2: float, g3: float, neighborhood, beta: float | None = None,
                    upb: list | None = None, upb_tol: float = 0.02 * math.pi,
                    rel_tol: float = 1e-6) -> RegimeLabel:
    """Label one point from its g2, g3 and a 3-point g2 stencil centred on it."""
    stencil = list(neighborhood)
    if len(stencil) < 3:
        raise ValueError("stencil needs at least 3 points")
    mid = len(stencil) // 2
    ext = stencil_extremum(stencil[mid - 1:mid + 2], rel_tol)
    evidence = dict(g2=g2, g3=g3, extremum=ext)
    if g2 > 1 and g3 < 1:
        return RegimeLabel("twoPB", evidence)
    if g2 < 1 and ext == "min":
        note = None
        if beta is not None and upb:
            d = min(_angle_gap(beta, b) for b in upb)
            if d < upb_tol:
                note = "interference"
        return RegimeLabel("onePB", evidence, note)
    if g2 > 1 and g3 > 1 and ext == "max":
        return RegimeLabel("PIT", evidence)
    return RegimeLabel("none", evidence)


def _angle_gap(a: float, b: float) -> float:
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def point_statistics(params: SystemParams, variant: str = "full"):
    pr, cs, _ = _point(params, variant)
    return pr, cs


def _point(params, variant):
    amps = steady_amplitudes(params)
    pr = probabilities(amps)
    return pr, correlations(pr, variant), amps.poles


def label_regimes(grid, g2s, g3s, upb=None) -> list[str]:
    """Display labels along a sweep; the two end points have no stencil and get "none".

    Pass ``upb`` only when ``grid`` holds angles.
    """
    out = []
    for i, x in enumerate(grid):
        if 0 < i < len(grid) - 1:
            lab = classify_regime(g2s[i], g3s[i], g2s[i - 1:i + 2],
                                  beta=x if upb is not None else None, upb=upb)
            out.append(lab.display)
        else:
            out.append("none")
    return out


def sweep(params: SystemParams, axis: str, grid, variant: str = "full", mapper=map) -> list[dict]:
    """Analytic sweep over ``beta`` or ``delta0`` with regime labels."""
    if axis not in ("beta", "delta0"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    grid = [float(x) for x in grid]
    stats = list(mapper(lambda x: _point(params.with_(**{axis: x}), variant), grid))
    upb = upb_angles(params) if axis == "beta" else None
    labels = label_regimes(grid, [cs.g2_11 for _, cs, _ in stats],
                           [cs.g3_11 for _, cs, _ in stats], upb if axis == "beta" else None)
    rows = []
    for x, lab, (pr, cs, poles) in zip(grid, labels, stats):
        row = {axis: x, **cs.as_dict()}
        row.update(P10=pr[(1, 0)], P01=pr[(0, 1)], P20=pr[(2, 0)], P11=pr[(1, 1)], P02=pr[(0, 2)])
        row["regime"] = lab
        row["poles"] = poles + cs.flagged
        rows.append(row)
    return rows
