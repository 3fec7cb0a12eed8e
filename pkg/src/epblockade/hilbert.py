"""Two-mode Fock bases and operator matrices.

Matrices are plain dense ``numpy`` arrays indexed by basis position. Ladder
transitions that leave the truncated basis are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BasisMismatch, DimensionCapError
from .params import SystemParams

DEFAULT_DIM_CAP = 4096

VARIANTS = ("isolated", "rotating_driven", "effective", "hermitian_part", "antihermitian_part")


@dataclass(frozen=True)
class FockBasis:
    truncation: tuple
    states: tuple
    index: dict = field(compare=False, repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self):
        return len(self.states)

    def total_numbers(self) -> np.ndarray:
        return np.array([m + n for m, n in self.states])

    def block(self, n_exc: int) -> np.ndarray:
        """Positions of the states with m + n = n_exc."""
        return np.array([i for i, (m, n) in enumerate(self.states) if m + n == n_exc], dtype=int)


def build_basis(truncation, cap: int = DEFAULT_DIM_CAP) -> FockBasis:
    """Basis for ``("total_excitation", N)`` or ``("per_mode", n1, n2)``.

    States are ordered by total number, then by CW occupation ascending.
    """
    kind, *caps = truncation
    if any(int(c) != c or c < 0 for c in caps):
        raise ValueError(f"truncation caps must be nonnegative integers: {caps}")
    caps = [int(c) for c in caps]
    if kind == "total_excitation" and len(caps) == 1:
        nmax = caps[0]
        dim = (nmax + 1) * (nmax + 2) // 2
        keep = lambda m, n: True  # noqa: E731
        n1 = n2 = nmax
    elif kind == "per_mode" and len(caps) == 2:
        n1, n2 = caps
        nmax = n1 + n2
        dim = (n1 + 1) * (n2 + 1)
        keep = lambda m, n: m <= n1 and n <= n2  # noqa: E731
    else:
        raise ValueError(f"unknown truncation {truncation!r}")
    if dim > cap:
        raise DimensionCapError(f"basis dimension {dim} exceeds cap {cap}")
    states = tuple((m, N - m) for N in range(nmax + 1) for m in range(N + 1) if keep(m, N - m))
    return FockBasis((kind, *caps), states, {s: i for i, s in enumerate(states)})


def total_excitation(nmax: int, cap: int = DEFAULT_DIM_CAP) -> FockBasis:
    return build_basis(("total_excitation", nmax), cap)


def per_mode(n1: int, n2: int | None = None, cap: int = DEFAULT_DIM_CAP) -> FockBasis:
    return build_basis(("per_mode", n1, n1 if n2 is None else n2), cap)


def _mode_index(mode) -> int:
    if mode in ("cw", 1, "1"):
        return 0
    if mode in ("ccw", 2, "2"):
        return 1
    raise ValueError(f"unknown mode {mode!r}")


def mode_operator(basis: FockBasis, mode, kind: str) -> np.ndarray:
    """Annihilation, creation or number operator of the CW or CCW mode."""
    k = _mode_index(mode)
    d = basis.dim
    op = np.zeros((d, d), dtype=complex)
    for j, s in enumerate(basis.states):
        occ = s[k]
        if kind == "number":
            op[j, j] = occ
            continue
        if kind not in ("annihilate", "create"):
            raise ValueError(f"unknown operator kind {kind!r}")
        step = -1 if kind == "annihilate" else 1
        t = list(s)
        t[k] += step
        i = basis.index.get(tuple(t))
        if i is not None:
            op[i, j] = math.sqrt(occ if step < 0 else occ + 1)
    return op


def _hopping(basis: FockBasis, j12: complex, j21: complex) -> np.ndarray:
    """J12 a1^dag a2 + J21 a2^dag a1, element by element."""
    d = basis.dim
    h = np.zeros((d, d), dtype=complex)
    for j, (m, n) in enumerate(basis.states):
        i = basis.index.get((m + 1, n - 1)) if n > 0 else None
        if i is not None:
            h[i, j] += j12 * math.sqrt((m + 1) * n)
        i = basis.index.get((m - 1, n + 1)) if m > 0 else None
        if i is not None:
            h[i, j] += j21 * math.sqrt(m * (n + 1))
    return h


def _diag(basis: FockBasis, freq: complex, chi: float) -> np.ndarray:
    return np.diag([freq * (m + n) + chi * (m * (m - 1) + n * (n - 1)) for m, n in basis.states])


def drive_operator(basis: FockBasis, xi: float) -> np.ndarray:
    """xi (a1^dag + a1)."""
    if xi < 0:
        raise ValueError("xi must be >= 0")
    a = mode_operator(basis, "cw", "annihilate")
    return xi * (a + a.conj().T)


def hermitian_parts(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split into (H + H^dag)/2 and (H - H^dag)/2."""
    hd = h.conj().T
    return 0.5 * (h + hd), 0.5 * (h - hd)


def build_hamiltonian(params: SystemParams, basis: FockBasis, variant: str,
                      source: str = "rotating_driven") -> np.ndarray:
    """Hamiltonian matrix in units of gamma.

    ``isolated`` is the scatterer-coupled Kerr resonator in the frame of
    ``params.omega0``; ``rotating_driven`` adds the drive in the laser frame;
    ``effective`` subtracts i gamma/2 per photon. The two partition variants
    split ``source`` (``isolated`` or ``rotating_driven``).
    """
    if not isinstance(basis, FockBasis):
        raise BasisMismatch("basis must be a FockBasis")
    if not isinstance(params, SystemParams):
        raise BasisMismatch("params must be a SystemParams")
    r = params.rates
    if variant == "isolated":
        return _diag(basis, params.omega, params.chi) + _hopping(basis, r.j12, r.j21)
    if variant == "rotating_driven":
        return (_diag(basis, r.delta, params.chi) + _hopping(basis, r.j12, r.j21)
                + drive_operator(basis, params.xi))
    if variant == "effective":
        return (build_hamiltonian(params, basis, "rotating_driven")
                - 0.5j * params.gamma * np.diag(basis.total_numbers()).astype(complex))
    if variant in ("hermitian_part", "antihermitian_part"):
        if source not in ("isolated", "rotating_driven"):
            raise ValueError(f"cannot partition {source!r}")
        hp, hm = hermitian_parts(build_hamiltonian(params, basis, source))
        return hp if variant == "hermitian_part" else hm
    raise ValueError(f"unknown variant {variant!r}")


def check_square(matrix: np.ndarray, basis: FockBasis | None = None) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise BasisMismatch(f"matrix must be square, got {matrix.shape}")
    if basis is not None and matrix.shape[0] != basis.dim:
        raise BasisMismatch(f"matrix dimension {matrix.shape[0]} != basis dimension {basis.dim}")


def dump_operator(matrix: np.ndarray) -> list:
    """Row-major [re, im] pairs for JSON dumps."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(matrix)]
