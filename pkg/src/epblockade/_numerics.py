"""Small numerical helpers: extremum search on grids and golden-section refinement."""

from __future__ import annotations

import numpy as np


def golden_minimize(f, lo: float, hi: float, tol: float) -> float:
    """Golden-section minimum of a unimodal ``f`` on [lo, hi] to absolute ``tol``."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def local_minima(values, periodic: bool = False) -> list[int]:
    """Indices of strict-or-flat local minima (plateaus reported once)."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    out = []
    if n < 3:
        return out
    rng = range(n) if periodic else range(1, n - 1)
    for i in rng:
        left, right = v[(i - 1) % n], v[(i + 1) % n]
        if v[i] < left and v[i] <= right:
            out.append(i)
    return out


def periodic_local_minima(values) -> list[int]:
    return local_minima(values, periodic=True)


def stencil_extremum(values, rel_tol: float = 1e-6) -> str | None:
    """Classify the centre of a 3-point stencil as 'min', 'max' or None."""
    a, b, c = (float(x) for x in values)
    tol = rel_tol * max(abs(a), abs(b), abs(c), 1e-300)
    if b < a - tol and b < c - tol:
        return "min"
    if b > a + tol and b > c + tol:
        return "max"
    return None
