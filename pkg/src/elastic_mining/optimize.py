"""Bracketing scalar solvers used by the equilibrium analysis."""

import math

INV_PHI = (math.sqrt(5) - 1) / 2


def bisect(fn, lo, hi, xtol=0.0, max_iter=200):
    """Root of ``fn`` on ``[lo, hi]`` by bisection.

    ``fn(lo)`` and ``fn(hi)`` must have opposite signs (zero counts as either).
    With ``xtol=0`` the bracket is halved until it cannot shrink further in
    double precision.
    """
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError(f"root not bracketed: f({lo})={flo}, f({hi})={fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        fmid = fn(mid)
        if fmid == 0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_section_max(fn, lo, hi, tol=1e-12):
    """Maximizer of a unimodal ``fn`` on ``[lo, hi]``.

    The achievable accuracy is about ``sqrt(eps) * |x|`` near a smooth
    maximum, regardless of ``tol``, because ``fn`` is flat to rounding there.
    """
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = fn(c), fn(d)
    while hi - lo > tol:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = fn(d)
        if c >= d:
            break
    return 0.5 * (lo + hi)
