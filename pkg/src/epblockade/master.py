"""Hybrid Lindblad master equation, thermal extension and steady states.

The hybrid equation

    d rho/dt = -i[H+, rho] - i{H-, rho} + sum_j D(rho, A_j) + 2i tr(rho H-) rho

equals G rho - tr(G rho) rho with the linear generator
G rho = -i(H rho - rho H^dag) + sum_j D(rho, A_j), H = H+ + H-. Time marching
uses that form with a sparse column-stacked G.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import BasisMismatch, NonConvergence, StepUnstable
from .hilbert import FockBasis, build_hamiltonian, hermitian_parts, mode_operator, per_mode
from .params import SystemParams
from .spectra import dissipator_superop, jump_rate

INF = float("inf")
UNSTABLE = 1e6


@dataclass(frozen=True)
class EvolutionOptions:
    dt: float = 1e-3
    t_max: float = 200.0
    convergence_tol: float = 1e-8
    renormalize_each_step: bool = True
    probe: float = 10.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_max > self.dt:
            raise ValueError("t_max must exceed dt")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be > 0")
        if not self.probe >= self.dt:
            raise ValueError("probe interval must be >= dt")


@dataclass
class DensityState:
    basis: FockBasis
    rho: np.ndarray
    t: float = 0.0
    residual: float = field(default=float("nan"))

    def check(self, herm_tol: float = 1e-9, trace_tol: float = 1e-9, pos_tol: float = 1e-7) -> None:
        r = self.rho
        if r.shape != (self.basis.dim, self.basis.dim):
            raise BasisMismatch("density matrix does not match its basis")
        if np.abs(r - r.conj().T).max() > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(r) - 1) > trace_tol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < -pos_tol:
            raise ValueError("density matrix has a negative eigenvalue")


def vacuum(basis: FockBasis) -> DensityState:
    rho = np.zeros((basis.dim, basis.dim), dtype=complex)
    rho[basis.index[(0, 0)], basis.index[(0, 0)]] = 1.0
    return DensityState(basis, rho)


def _check_ops(rho, hplus, hminus, jumps, tol=1e-12):
    d = rho.shape[0]
    for m in (hplus, hminus, *jumps):
        if m.shape != (d, d):
            raise BasisMismatch(f"operator shape {m.shape} does not match state dimension {d}")
    scale = max(1.0, np.abs(hplus).max(), np.abs(hminus).max())
    if np.abs(hplus - hplus.conj().T).max() > tol * scale:
        raise ValueError("hplus is not Hermitian")
    if np.abs(hminus + hminus.conj().T).max() > tol * scale:
        raise ValueError("hminus is not anti-Hermitian")


def _dissipate(rho, a):
    ad = a.conj().T
    ada = ad @ a
    return a @ rho @ ad - 0.5 * (ada @ rho + rho @ ada)


def hybrid_rhs(rho, hplus, hminus, jumps, check: bool = True) -> np.ndarray:
    rho = rho.rho if isinstance(rho, DensityState) else rho
    if check:
        _check_ops(rho, hplus, hminus, jumps)
    out = -1j * (hplus @ rho - rho @ hplus) - 1j * (hminus @ rho + rho @ hminus)
    for a in jumps:
        out += _dissipate(rho, a)
    out += 2j * np.trace(rho @ hminus) * rho
    return out


def thermal_jumps(annihilators, gamma: float, nth: float) -> list:
    """Down jumps at gamma (nth + 1) and, for nth > 0, up jumps at gamma nth."""
    down = [math.sqrt(gamma * (nth + 1)) * a for a in annihilators]
    up = [math.sqrt(gamma * nth) * a.conj().T for a in annihilators] if nth > 0 else []
    return down + up


def thermal_rhs(rho, hplus, hminus, annihilators, gamma: float, nth: float,
                check: bool = True) -> np.ndarray:
    if nth < 0:
        raise ValueError("nth must be >= 0")
    return hybrid_rhs(rho, hplus, hminus, thermal_jumps(annihilators, gamma, nth), check)


def system_operators(params: SystemParams, basis: FockBasis, variant: str = "hybrid",
                     loss_model: str = "gamma_only"):
    """(H+, H-, jump list) of the driven rotating-frame problem."""
    hp, hm = hermitian_parts(build_hamiltonian(params, basis, "rotating_driven"))
    rate = jump_rate(params, loss_model)
    ann = [mode_operator(basis, m, "annihilate") for m in ("cw", "ccw")]
    if variant == "hybrid":
        jumps = thermal_jumps(ann, rate, 0.0)
    elif variant == "thermal":
        jumps = thermal_jumps(ann, rate, params.nth)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return hp, hm, jumps


def linear_generator(hplus, hminus, jumps, sparse: bool = False):
    """Column-stacked matrix of sigma -> -i(H sigma - sigma H^dag) + sum D(sigma, A)."""
    if not sparse:
        h = hplus + hminus
        eye = np.eye(h.shape[0])
        gen = -1j * (np.kron(eye, h) - np.kron(h.conj(), eye))
        for a in jumps:
            gen += dissipator_superop(a)
        return gen
    h = sp.csr_matrix(hplus + hminus)
    eye = sp.identity(h.shape[0], format="csr")
    gen = -1j * (sp.kron(eye, h) - sp.kron(h.conj(), eye))
    for a in jumps:
        a = sp.csr_matrix(a)
        ada = (a.conj().T @ a).tocsr()
        gen = gen + sp.kron(a.conj(), a) - 0.5 * sp.kron(eye, ada) - 0.5 * sp.kron(ada.T, eye)
    gen = sp.csr_matrix(gen)
    gen.eliminate_zeros()
    return gen


def _snapshot(t, vec, d, nm_diag, nn_diag, diag_idx):
    dg = vec[diag_idx]
    return (t, float(dg.sum().real), float(np.vdot(vec, vec).real),
            float(dg.real @ nm_diag), float(dg.real @ nn_diag))


def evolve_to_steady(params: SystemParams, basis: FockBasis, opts: EvolutionOptions | None = None,
                     variant: str = "hybrid", rho0: np.ndarray | None = None,
                     loss_model: str = "gamma_only", trace_log: list | None = None,
                     log_every: int = 1000) -> DensityState:
    """Classic RK4 from the vacuum (or ``rho0``) until successive probes agree.

    Convergence is tested every ``opts.probe`` time units on the max-norm change
    per unit time. Appends (t, trace, purity, mean_m, mean_n) rows to
    ``trace_log`` every ``log_every`` steps when given.
    """
    opts = opts or EvolutionOptions()
    hp, hm, jumps = system_operators(params, basis, variant, loss_model)
    gen = linear_generator(hp, hm, jumps, sparse=True)
    d = basis.dim
    diag_idx = np.arange(d) * (d + 1)
    nm_diag = np.array([s[0] for s in basis.states], dtype=float)
    nn_diag = np.array([s[1] for s in basis.states], dtype=float)
    rho = vacuum(basis).rho if rho0 is None else np.array(rho0, dtype=complex)
    if rho.shape != (d, d):
        raise BasisMismatch("initial state does not match the basis")
    v = rho.reshape(-1, order="F").copy()
    h = opts.dt
    steps = max(1, int(round(opts.probe / h)))
    span = steps * h
    renorm = opts.renormalize_each_step

    def f(x):
        gx = gen @ x
        return gx - gx[diag_idx].sum() * x

    if trace_log is not None:
        trace_log.append(_snapshot(0.0, v, d, nm_diag, nn_diag, diag_idx))
    t = 0.0
    n_done = 0
    residual = INF
    while t + span <= opts.t_max + 1e-9:
        prev = v
        # a diverging step is reported as StepUnstable below, not as a float warning
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for _ in range(steps):
                k1 = f(v)
                k2 = f(v + (0.5 * h) * k1)
                k3 = f(v + (0.5 * h) * k2)
                k4 = f(v + h * k3)
                v = v + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
                if renorm:
                    v = v / v[diag_idx].sum()
                n_done += 1
                if trace_log is not None and n_done % log_every == 0:
                    trace_log.append(_snapshot(n_done * h, v, d, nm_diag, nn_diag, diag_idx))
        if not np.all(np.isfinite(v)) or np.abs(v).max() > UNSTABLE:
            raise StepUnstable(f"density matrix element exceeded 1e6 at t={t + span:g}; reduce dt")
        t += span
        residual = float(np.abs(v - prev).max() / span)
        if residual < opts.convergence_tol:
            rho = v.reshape(d, d, order="F")
            return DensityState(basis, 0.5 * (rho + rho.conj().T), t, residual)
    raise NonConvergence(f"no steady state by t_max={opts.t_max}", residual)


def _falling(n: np.ndarray, k: int) -> np.ndarray:
    out = np.ones_like(n)
    for j in range(k):
        out = out * (n - j)
    return out


def observables(state: DensityState) -> dict:
    """Means, equal-time correlations and the CW photon-number marginal."""
    basis = state.basis
    diag = np.real(np.diag(state.rho))
    m = np.array([s[0] for s in basis.states], dtype=float)
    n = np.array([s[1] for s in basis.states], dtype=float)
    mean_m, mean_n = float(diag @ m), float(diag @ n)
    flagged = []

    def ratio(num, den, name):
        if den <= 1e-300:
            flagged.append(name)
            return INF
        return float(num / den)

    out = dict(
        mean_m=mean_m,
        mean_n=mean_n,
        g2_11=ratio(diag @ _falling(m, 2), mean_m**2, "g2_11"),
        g2_22=ratio(diag @ _falling(n, 2), mean_n**2, "g2_22"),
        g2_12=ratio(diag @ (m * n), mean_m * mean_n, "g2_12"),
        g3_11=ratio(diag @ _falling(m, 3), mean_m**3, "g3_11"),
        g3_22=ratio(diag @ _falling(n, 3), mean_n**3, "g3_22"),
    )
    marg = np.zeros(int(m.max()) + 1)
    np.add.at(marg, m.astype(int), diag)
    out["photon_marginal_cw"] = marg.tolist()
    out["probabilities"] = {s: float(p) for s, p in zip(basis.states, diag)}
    out["flagged"] = tuple(flagged)
    return out


def steady_statistics(params: SystemParams, basis: FockBasis | None = None,
                      opts: EvolutionOptions | None = None, variant: str = "hybrid",
                      loss_model: str = "gamma_only") -> dict:
    basis = basis or per_mode(4, 4)
    return observables(evolve_to_steady(params, basis, opts, variant, loss_model=loss_model))


def _first_crossing(nths, g2s, level: float = 1.0):
    for i, g in enumerate(g2s):
        if g > level:
            if i == 0:
                return float(nths[0])
            x0, x1, y0, y1 = nths[i - 1], nths[i], g2s[i - 1], g2s[i]
            return float(x0 + (level - y0) * (x1 - x0) / (y1 - y0))
    return None


def thermal_sweep(params: SystemParams, nth_grid, beta_list, basis: FockBasis | None = None,
                  opts: EvolutionOptions | None = None, loss_model: str = "gamma_only",
                  mapper=map):
    """Rows (beta, nth, g2_11) plus, per beta, the first nth where g2_11 exceeds 1."""
    nths = [float(x) for x in nth_grid]
    betas = [float(b) for b in beta_list]
    if not nths or not betas:
        raise ValueError("grids must be nonempty")
    basis = basis or per_mode(5, 5)
    jobs = [(b, x) for b in betas for x in nths]

    def run(job):
        b, x = job
        st = evolve_to_steady(params.with_(beta=b, nth=x), basis, opts, "thermal", loss_model=loss_model)
        return observables(st)["g2_11"]

    g2 = list(mapper(run, jobs))
    rows = [dict(beta=b, nth=x, g2_11=g) for (b, x), g in zip(jobs, g2)]
    crossings = {}
    for i, b in enumerate(betas):
        crossings[b] = _first_crossing(nths, g2[i * len(nths):(i + 1) * len(nths)])
    return rows, crossings
