"""Physical parameters, derived rates and unit conversions.

All rates are stored in units of the intrinsic loss rate gamma, which is fixed to 1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import constants

from ._numerics import golden_minimize, periodic_local_minima

TWO_PI = 2.0 * math.pi

# Device constants used throughout the reference scenarios.
DEVICE_LAMBDA = 1550e-9
DEVICE_N0 = 1.4
DEVICE_VEFF = 150e-18
DEVICE_Q = 5e9

PAPER_EPS1 = 1.5 - 0.1j
PAPER_EPS2 = 1.485 - 0.14j
PAPER_XI = 0.25


def _as_rate(value, name: str) -> complex:
    if isinstance(value, dict):
        value = complex(value.get("re", 0.0), value.get("im", 0.0))
    elif isinstance(value, (list, tuple)) and len(value) == 2:
        value = complex(value[0], value[1])
    try:
        z = complex(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} is not a complex rate: {value!r}") from exc
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{name} must be finite, got {z}")
    return z


def normalize_angle(beta: float) -> float:
    b = math.fmod(float(beta), TWO_PI)
    if b < 0:
        b += TWO_PI
    # fmod can land exactly on 2*pi after the shift
    return 0.0 if b >= TWO_PI else b


@dataclass(frozen=True)
class DerivedRates:
    j12: complex
    j21: complex
    delta: complex
    gamma_prime: float
    kappa: float
    delta1: complex
    delta2: complex
    delta3: complex
    delta4: complex

    @property
    def jj(self) -> complex:
        return self.j12 * self.j21


@dataclass(frozen=True)
class SystemParams:
    """Inputs of the two-mode model, in units of gamma.

    ``omega0`` fixes the frame of the isolated Hamiltonian: the bare cavity
    frequency measured from the reference, so that omega = omega0 + eps1 + eps2.
    """

    eps1: complex = PAPER_EPS1
    eps2: complex = PAPER_EPS2
    sigma: int = 1
    beta: float = 0.0
    chi: float = 0.0
    delta0: float = 0.0
    xi: float = 0.0
    gamma: float = 1.0
    nth: float = 0.0
    omega0: float = 0.0

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "eps1", _as_rate(self.eps1, "eps1"))
        set_(self, "eps2", _as_rate(self.eps2, "eps2"))
        if int(self.sigma) != self.sigma or self.sigma < 1:
            raise ValueError(f"sigma must be a positive integer, got {self.sigma}")
        set_(self, "sigma", int(self.sigma))
        if self.gamma != 1.0:
            raise ValueError("gamma is the rate unit and must equal 1")
        for name in ("chi", "xi", "nth"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
            set_(self, name, v)
        for name in ("delta0", "omega0", "beta"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            set_(self, name, v)
        set_(self, "beta", normalize_angle(self.beta))

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @cached_property
    def rates(self) -> DerivedRates:
        return derived_rates(self)

    @property
    def omega(self) -> complex:
        """Complex mode frequency in the frame of ``omega0``."""
        return self.omega0 + self.eps1 + self.eps2


def coupling_rates(eps1: complex, eps2: complex, sigma: int, beta: float) -> tuple[complex, complex]:
    """Backscattering rates (J12, J21) for two scatterers at relative angle beta."""
    if sigma < 1:
        raise ValueError("sigma must be >= 1")
    phase = cmath.exp(2j * sigma * beta)
    return eps1 + eps2 * phase, eps1 + eps2 / phase


def derived_rates(p: SystemParams) -> DerivedRates:
    j12, j21 = coupling_rates(p.eps1, p.eps2, p.sigma, p.beta)
    delta = p.delta0 + p.eps1 + p.eps2
    gp = -(p.eps1 + p.eps2).imag
    d1 = 2 * delta - 1j * p.gamma
    d2 = d1 + 2 * p.chi
    d3 = d1 + 4 * p.chi
    d4 = 3 * d3 - 8 * p.chi
    return DerivedRates(j12, j21, delta, gp, p.gamma + 2 * gp, d1, d2, d3, d4)


def resonant_delta0(eps1: complex, eps2: complex) -> float:
    """Delta0 placing the laser on the split-mode centre (Re Delta = 0)."""
    return -(eps1 + eps2).real


def kerr_coefficient(lam: float, n2: float, n0: float, veff: float, q: float) -> float:
    """Single-photon Kerr shift chi/gamma.

    chi = hbar omega^2 c n2 / (n0^2 V), gamma = omega / Q, omega = 2 pi c / lam.
    """
    for name, v in (("lambda", lam), ("n2", n2), ("n0", n0), ("veff", veff), ("q", q)):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive, got {v}")
    c = constants.c
    omega = TWO_PI * c / lam
    chi = constants.hbar * omega**2 * c * n2 / (n0**2 * veff)
    return chi / (omega / q)


def device_chi(n2: float) -> float:
    return kerr_coefficient(DEVICE_LAMBDA, n2, DEVICE_N0, DEVICE_VEFF, DEVICE_Q)


CHI_WEAK = device_chi(1e-15)
CHI_STANDARD = device_chi(1e-14)
CHI_STRONG = device_chi(3e-14)


def nth_from_temperature(temperature: float, lam: float, convention: str = "bose_einstein") -> float:
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    x = constants.hbar * TWO_PI * constants.c / (lam * constants.k * temperature)
    if convention == "bose_einstein":
        return 1.0 / math.expm1(x) if x < 700 else 0.0
    if convention == "paper_literal":
        return math.exp(-x)
    raise ValueError(f"unknown convention {convention!r}")


@dataclass(frozen=True)
class EpAngle:
    beta: float
    vanishing: str  # "J12" or "J21"
    beta_min: float = field(default=float("nan"))
    min_modulus: float = field(default=float("nan"))


def ep_angles(eps1: complex, eps2: complex, sigma: int, grid_points: int = 2048,
              tol: float = 1e-10) -> list[EpAngle]:
    """Angles where the phase condition zeroes J12 or J21.

    Each entry also carries the numerically minimizing beta of the flagged
    coupling and its modulus there, since exact zeros need |eps1| = |eps2|.
    """
    if eps1 == 0 or eps2 == 0:
        raise ValueError("eps1 and eps2 must be nonzero")
    dphi = cmath.phase(eps1) - cmath.phase(eps2)
    grid = np.linspace(0.0, TWO_PI, grid_points, endpoint=False)
    out = []
    for which, sign in (("J21", -1.0), ("J12", 1.0)):
        idx = 0 if which == "J12" else 1

        def modulus(b, idx=idx):
            return abs(coupling_rates(eps1, eps2, sigma, b)[idx])

        vals = np.array([modulus(b) for b in grid])
        minima = []
        for i in periodic_local_minima(vals):
            step = grid[1] - grid[0]
            b = golden_minimize(modulus, grid[i] - step, grid[i] + step, tol)
            minima.append(normalize_angle(b))
        for z in range(1, 4 * sigma, 2):
            b = normalize_angle((z * math.pi + sign * dphi) / (2 * sigma))
            if minima:
                bm = min(minima, key=lambda m: _circ_dist(m, b))
            else:
                bm = b
            out.append(EpAngle(b, which, bm, modulus(bm)))
    # duplicate formula angles collapse when z wraps around
    uniq = {}
    for a in out:
        uniq.setdefault((round(a.beta, 12), a.vanishing), a)
    return sorted(uniq.values(), key=lambda a: (a.beta, a.vanishing))


def _circ_dist(a: float, b: float) -> float:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def paper_params(**overrides) -> SystemParams:
    """Reference parameters with the laser on the split-mode centre."""
    base = dict(eps1=PAPER_EPS1, eps2=PAPER_EPS2, sigma=1, chi=CHI_STANDARD,
                delta0=resonant_delta0(PAPER_EPS1, PAPER_EPS2), xi=PAPER_XI)
    base.update(overrides)
    return SystemParams(**base)
