"""Quadrature rules shared by the symbol and operator modules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def _jacobi(n, beta):
    # weight (1 + x)**beta on [-1, 1] mapped to r**beta on [0, 1]
    x, w = roots_jacobi(n, 0.0, beta)
    return (x + 1) / 2, w / 2 ** (1 + beta)


def gauss_legendre(a, b, n=16):
    """Nodes and weights of the ``n``-point rule on ``[a, b]``."""
    x, w = _legendre(n)
    return a + (b - a) * x, (b - a) * w


def gauss_jacobi(delta, beta, n=20):
    """Rule for ``int_0^delta g(r) r**beta dr`` with ``beta > -1``."""
    x, w = _jacobi(n, float(beta))
    return delta * x, w * delta ** (1 + beta)


def panel_rule(breaks, n=16):
    """Composite Gauss-Legendre rule over consecutive ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            x, w = gauss_legendre(a, b, n)
            xs.append(x)
            ws.append(w)
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def graded_breaks(start, stop, max_len, fixed=()):
    """Breakpoints from ``start`` to ``stop``.

    Panels grow geometrically (ratio two) away from ``start`` until they
    reach ``max_len``; every point of ``fixed`` inside the range is kept as a
    break.
    """
    pts = [start]
    r = start
    while r < stop:
        step = min(max_len, r if r > 0 else max_len)
        r = min(r + step, stop)
        pts.append(r)
    pts = np.union1d(pts, [f for f in fixed if start < f < stop])
    return pts


def phi(t, comp):
    """``exp(i t) - 1 - i t comp`` without cancellation for small ``t``.

    ``comp`` broadcasts against ``t`` and is typically 0 or 1.
    """
    t = np.asarray(t, dtype=float)
    comp = np.asarray(comp, dtype=float)
    re = -2.0 * np.sin(t / 2) ** 2
    small = np.abs(t) < 0.1
    t2 = t * t
    series = -t * t2 / 6 * (1 - t2 / 20 * (1 - t2 / 42 * (1 - t2 / 72 * (1 - t2 / 110))))
    # sin t - t comp; exact series where comp == 1 and t is small
    im = np.where(small & (comp == 1), series, np.sin(t) - t * comp)
    return re + 1j * im


def radial_rule(sigma, p, delta, stop, max_len, fixed=(), n=16, n_jac=20):
    """Rule for ``int_0^stop F(r) r**(-1-sigma) dr`` with ``F = O(r**p)``.

    Returns nodes ``r`` and weights ``w`` such that the integral is
    approximated by ``sum(w * F(r) / r**p)`` on ``[0, delta]`` (Gauss-Jacobi)
    joined with ``sum(w * F(r))`` beyond.  To keep one formula, the Jacobi
    weights are converted so that ``sum(w * F(r))`` holds on every node.
    """
    beta = p - 1 - sigma
    r0, w0 = gauss_jacobi(delta, beta, n_jac)
    w0 = w0 / r0**p
    br = graded_breaks(delta, stop, max_len, fixed)
    r1, w1 = panel_rule(br, n)
    w1 = w1 * r1 ** (-1 - sigma)
    return np.concatenate([r0, r1]), np.concatenate([w0, w1])
