"""Eigensystems, Hamiltonian and Liouvillian exceptional points.

Superoperators use column stacking: vec(A rho B) = (B^T kron A) vec(rho).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._numerics import golden_minimize, local_minima
from .errors import DimensionCapError, HermitianityViolation, NonConvergence, TrackingLost
from .hilbert import FockBasis, build_hamiltonian, drive_operator, hermitian_parts, mode_operator, total_excitation
from .params import SystemParams

LIOUVILLIAN_CAP = 4096
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SubspaceEigensystem:
    n_excitations: int | None
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    labels: tuple = ()
    normalized: bool = True

    def pair(self, label):
        k = self.labels.index(label)
        return self.eigenvalues[k], self.eigenvectors[:, k]


@dataclass(frozen=True)
class EpReport:
    beta: float
    gap: complex
    overlap: float
    kind: str
    subspace: object
    is_ep: bool = False
    refined: bool = False

    @property
    def gap_abs(self) -> float:
        return abs(self.gap)


@dataclass(frozen=True)
class LiouvillianMatrix:
    matrix: np.ndarray
    d: int
    vectorization: str = field(default="column-stacking")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def _null_vector(a: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(a)
    return vh[-1].conj()


def _unit(v: np.ndarray, h: np.ndarray, lam: complex) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < 1e-150:
        v = _null_vector(h - lam * np.eye(len(h)))
        n = np.linalg.norm(v)
    return v / n


def closed_form_eigensystem(params: SystemParams, n: int) -> SubspaceEigensystem:
    """Analytic eigenpairs of the isolated Hamiltonian in the n-photon block.

    Block ordering follows the basis: (0,N), (1,N-1), ..., (N,0).
    """
    if n not in (0, 1, 2):
        raise ValueError("closed form exists only for n <= 2; use numeric_eigensystem")
    r = params.rates
    w, chi = params.omega, params.chi
    if n == 0:
        return SubspaceEigensystem(0, np.array([0j]), np.ones((1, 1), complex), ("0",))
    jj = r.j12 * r.j21
    s2 = math.sqrt(2.0)
    if n == 1:
        h = np.array([[w, r.j21], [r.j12, w]])
        d1 = cmath.sqrt(jj)
        vals, vecs = [], []
        for sign in (1, -1):
            lam = w + sign * d1
            a = np.array([r.j21, sign * d1])
            b = np.array([sign * d1, r.j12])
            v = a if np.linalg.norm(a) >= np.linalg.norm(b) else b
            vals.append(lam)
            vecs.append(_unit(v, h, lam))
        return SubspaceEigensystem(1, np.array(vals), np.column_stack(vecs), ("+", "-"))
    h = np.array([[2 * w + 2 * chi, s2 * r.j21, 0],
                  [s2 * r.j12, 2 * w, s2 * r.j21],
                  [0, s2 * r.j12, 2 * w + 2 * chi]])
    root = cmath.sqrt(chi * chi + 4 * jj)
    plus, minus = -chi + root, -chi - root
    # roots multiply to -4 jj; take the small one from the large to avoid cancellation
    if abs(plus) < abs(minus):
        plus = -4 * jj / minus
    elif abs(minus) < abs(plus):
        minus = -4 * jj / plus
    vals, vecs = [], []
    for label, d2 in (("+", plus), ("0", 0j), ("-", minus)):
        lam = 2 * w + 2 * chi + d2
        if label == "0":
            v = np.array([r.j21, 0, -r.j12])
        else:
            v = np.array([s2 * r.j21, d2, s2 * r.j12])
        vals.append(lam)
        vecs.append(_unit(v, h, lam))
    return SubspaceEigensystem(2, np.array(vals), np.column_stack(vecs), ("+", "0", "-"))


def numeric_eigensystem(matrix: np.ndarray, n_excitations: int | None = None,
                        check: bool = True) -> SubspaceEigensystem:
    """All eigenpairs of a dense complex matrix, unit-norm eigenvectors."""
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonConvergence("matrix has non-finite entries")
    try:
        vals, vecs = sla.eig(a, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NonConvergence(f"QR iteration failed: {exc}") from exc
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    if check:
        scale = max(np.abs(a).max(), 1e-300)
        res = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
        worst = float(res.max())
        if worst > RESIDUAL_TOL * scale:
            raise NonConvergence(f"eigenpair residual {worst:.3e} exceeds bound", worst)
    return SubspaceEigensystem(n_excitations, vals, vecs, tuple(range(len(vals))))


def _block(params: SystemParams, n: int) -> np.ndarray:
    basis = total_excitation(n)
    idx = basis.block(n)
    return build_hamiltonian(params, basis, "isolated")[np.ix_(idx, idx)]


def _hamiltonian_pair(params: SystemParams, n: int):
    """Numeric (lambda_a, v_a, lambda_b, v_b) for the coalescing pair of block n."""
    es = numeric_eigensystem(_block(params, n), n)
    cf = closed_form_eigensystem(params, n)
    vals, vecs = es.eigenvalues, es.eigenvectors
    if n == 1:
        e_plus = cf.pair("+")[0]
        order = np.argsort(np.abs(vals - e_plus))
        ia, ib = order[0], order[1]
    elif n == 2:
        e_minus, e_plus = cf.pair("-")[0], cf.pair("+")[0]
        drop = int(np.argmin(np.abs(vals - e_minus)))
        rest = [i for i in range(3) if i != drop]
        ia, ib = sorted(rest, key=lambda i: abs(vals[i] - e_plus))
    else:
        raise ValueError("Hamiltonian EP scans cover subspaces 1 and 2")
    return vals[ia], vecs[:, ia], vals[ib], vecs[:, ib]


def _overlap(u: np.ndarray, v: np.ndarray) -> float:
    return float(min(abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v)), 1.0))


def _is_periodic(betas: np.ndarray, period: float) -> bool:
    step = betas[1] - betas[0]
    return abs((betas[-1] + step - betas[0]) - period) < 1e-9 * period


def _scan(evaluate, betas, kind, subspace, gap_tol, overlap_tol, tol_beta, period):
    betas = np.asarray(betas, dtype=float)
    if betas.ndim != 1 or len(betas) < 3 or np.any(np.diff(betas) <= 0):
        raise ValueError("beta grid must be sorted with at least 3 points")
    rows = [evaluate(b) for b in betas]
    gaps = np.array([abs(g) for g, _ in rows])
    reports = [EpReport(float(b), g, ov, kind, subspace) for b, (g, ov) in zip(betas, rows)]
    periodic = _is_periodic(betas, period)
    n = len(betas)
    for i in local_minima(gaps, periodic=periodic):
        lo = betas[i - 1] if i > 0 else betas[-1] - period
        hi = betas[i + 1] if i < n - 1 else betas[0] + period
        b = golden_minimize(lambda x: abs(evaluate(x)[0]), lo, hi, tol_beta)
        b = b % period if periodic else b
        g, ov = evaluate(b)
        flag = abs(g) < gap_tol and ov > 1.0 - overlap_tol
        reports.append(EpReport(float(b), g, ov, kind, subspace, flag, True))
    reports.sort(key=lambda r: (r.beta, r.refined))
    return reports


def hamiltonian_ep_scan(params: SystemParams, betas, subspace: int = 1, gap_tol: float = 0.1,
                        overlap_tol: float = 0.3, tol_beta: float = 1e-4 * math.pi) -> list[EpReport]:
    """Gap and eigenvector overlap of the coalescing pair across beta.

    Grid rows are never flagged. Each local minimum of the gap is refined by
    golden section and flagged when both tolerances hold.
    """
    def evaluate(b):
        la, va, lb, vb = _hamiltonian_pair(params.with_(beta=b), subspace)
        return la - lb, _overlap(va, vb)

    return _scan(evaluate, betas, "hamiltonian", subspace, gap_tol, overlap_tol, tol_beta,
                 2 * math.pi)


def gamma_jump_operator(antihermitian_part: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Principal square root of M = -2i H_minus."""
    hm = np.asarray(antihermitian_part, dtype=complex)
    if np.abs(hm + hm.conj().T).max(initial=0.0) > tol * max(1.0, np.abs(hm).max(initial=0.0)):
        raise HermitianityViolation("input is not anti-Hermitian")
    m = -2j * hm
    m = 0.5 * (m + m.conj().T)
    w, u = np.linalg.eigh(m)
    return (u * np.sqrt(w.astype(complex))) @ u.conj().T


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Matrix of rho -> -i [h, rho]."""
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def dissipator_superop(a: np.ndarray, rate: float = 1.0) -> np.ndarray:
    """Matrix of rho -> rate (a rho a^dag - {a^dag a, rho}/2)."""
    eye = np.eye(a.shape[0])
    ada = a.conj().T @ a
    return rate * (np.kron(a.conj(), a) - 0.5 * np.kron(eye, ada) - 0.5 * np.kron(ada.T, eye))


def jump_rate(params: SystemParams, loss_model: str) -> float:
    if loss_model == "gamma_only":
        return params.gamma
    if loss_model == "kappa":
        return params.rates.kappa
    raise ValueError(f"unknown loss_model {loss_model!r}")


def liouvillian_matrix(params: SystemParams, basis: FockBasis, include_drive: bool = False,
                       loss_model: str = "gamma_only", cap: int = LIOUVILLIAN_CAP) -> LiouvillianMatrix:
    """Lindblad generator with the extra jump operator from the anti-Hermitian part."""
    d = basis.dim
    if d * d > cap:
        raise DimensionCapError(f"Liouvillian dimension {d * d} exceeds cap {cap}")
    hp, hm = hermitian_parts(build_hamiltonian(params, basis, "isolated"))
    if include_drive:
        hp = hp + drive_operator(basis, params.xi)
    rate = jump_rate(params, loss_model)
    lmat = commutator_superop(hp)
    for mode in ("cw", "ccw"):
        lmat += dissipator_superop(mode_operator(basis, mode, "annihilate"), rate)
    lmat += dissipator_superop(gamma_jump_operator(hm))
    return LiouvillianMatrix(lmat, d)


def coherence_sector(basis: FockBasis, k: int = 1) -> np.ndarray:
    """Vectorized positions of |i><j| with N_i - N_j = k."""
    tot = basis.total_numbers()
    d = basis.dim
    return np.array([i + d * j for j in range(d) for i in range(d) if tot[i] - tot[j] == k], dtype=int)


def _slowest_pair(vals: np.ndarray) -> list[int]:
    return list(np.argsort(np.abs(vals.real), kind="stable")[:2])


def _track(prev: np.ndarray, vals: np.ndarray, ratio: float, beta: float) -> list[int]:
    """Indices in ``vals`` continuing the tracked pair ``prev``.

    Swaps inside the pair are allowed; a third eigenvalue nearly as close as
    the pair members makes the match ambiguous.
    """
    dist = np.min(np.abs(vals[:, None] - prev[None, :]), axis=1)
    order = np.argsort(dist, kind="stable")
    pick = list(order[:2])
    if len(vals) > 2:
        d_in, d_out = dist[order[1]], dist[order[2]]
        if d_in > ratio * d_out:
            raise TrackingLost(f"ambiguous eigenvalue match at beta={beta:.6g}", beta)
    # order within the pair by nearest assignment
    a, b = pick
    keep = abs(vals[a] - prev[0]) + abs(vals[b] - prev[1])
    swap = abs(vals[b] - prev[0]) + abs(vals[a] - prev[1])
    return [a, b] if keep <= swap else [b, a]


def liouvillian_ep_scan(params: SystemParams, betas, basis: FockBasis | None = None,
                        sector: int = 1, ratio: float = 0.5, gap_tol: float = 0.1,
                        overlap_tol: float = 0.3, tol_beta: float = 1e-4 * math.pi,
                        loss_model: str = "gamma_only") -> list[EpReport]:
    """Track the slowest eigenvalue pair of one coherence sector across beta.

    The drive is not part of this analysis, so ``params.xi`` is ignored.
    """
    basis = basis or total_excitation(2)
    idx = coherence_sector(basis, sector)
    params = params.with_(xi=0.0)

    def spectrum(b):
        lmat = liouvillian_matrix(params.with_(beta=b), basis, loss_model=loss_model).matrix
        es = numeric_eigensystem(lmat[np.ix_(idx, idx)], check=False)
        return es.eigenvalues, es.eigenvectors

    betas = np.asarray(betas, dtype=float)
    tracked, pairs = [], []
    prev = None
    for b in betas:
        vals, vecs = spectrum(b)
        pick = _slowest_pair(vals) if prev is None else _track(prev, vals, ratio, b)
        prev = vals[pick]
        pairs.append(prev)
        tracked.append((vals[pick[0]] - vals[pick[1]], _overlap(vecs[:, pick[0]], vecs[:, pick[1]])))
    lookup = dict(zip(betas.tolist(), tracked))

    def evaluate(b):
        if b in lookup:
            return lookup[b]
        # refinement points sit between grid nodes; continue from the nearest one
        j = int(np.argmin(np.abs(betas - b)))
        vals, vecs = spectrum(b)
        pick = _track(pairs[j], vals, 1.0, b)
        return vals[pick[0]] - vals[pick[1]], _overlap(vecs[:, pick[0]], vecs[:, pick[1]])

    return _scan(evaluate, betas, "liouvillian", "full", gap_tol, overlap_tol, tol_beta, 2 * math.pi)
