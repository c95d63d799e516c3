"""Bracketed root finding shared by the solvers."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .exceptions import SolverNonconvergence

XTOL = 1e-15
MAXITER = 200


def find_root(f, lo, hi, name="equation", expand=True, xtol=XTOL):
    """Root of a monotone scalar function on ``[lo, hi]``.

    When ``expand`` is set the upper end is doubled until the bracket
    changes sign.  Raises :class:`SolverNonconvergence` if no sign change is
    found or Brent's method stops early.
    """
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo
    n = 0
    while np.sign(f_lo) == np.sign(f_hi):
        if not expand or n > 60:
            raise SolverNonconvergence(
                f"{name}: no sign change on [{lo:.6g}, {hi:.6g}]",
                {name: float(min(abs(f_lo), abs(f_hi)))})
        hi = 2.0 * hi if hi > 0 else hi + 1.0
        f_hi = f(hi)
        n += 1
    if f_hi == 0:
        return hi
    x, info = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps,
                     maxiter=MAXITER, full_output=True, disp=False)
    if not info.converged:
        raise SolverNonconvergence(f"{name}: root search did not converge", {name: float(f(x))})
    return x


def bisect_vec(f, lo, hi, iters=200, xtol=1e-15):
    """Elementwise bisection for increasing ``f`` on arrays of brackets."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = f(mid) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.all(hi - lo <= xtol * np.maximum(1.0, np.abs(hi))):
            break
    return 0.5 * (lo + hi)


def golden_section(f, lo, hi, tol=1e-6, maxiter=200):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)
