"""Fourier symbols of x-independent jump kernels.

The symbol is ``m(xi) = int (exp(i y.xi) - 1 - i y.xi chi(y)) K(y) dy``.
Writing ``y = r theta`` splits it into an angular average of the radial
integral ``I(s) = int_0^inf (exp(i r s) - 1 - i r s chi(r)) r**(-1-sigma) dr``
which is known up to a single complex constant per order:

* ``sigma != 1``: ``I(s) = |s|**sigma C`` for ``s > 0`` and its conjugate
  for ``s < 0``;
* ``sigma == 1``: ``I(s) = |s| Re C + i s (Im C - log|s|)``.

The constant ``C`` is computed once by adaptive quadrature.  Wherever the
amplitude is not constant along rays (inside ``far_radius`` or for
truncated kernels) a correction is added by product quadrature over the
bounded region.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import j0

from ._quadrature import gauss_legendre, phi, radial_rule
from .errors import AccuracyError, DomainError
from .field import GridSpec
from .kernel import KernelSpec, compensator_kind, CompensatorKind

__all__ = [
    "SymbolTable",
    "ray_constant",
    "radial_integral",
    "symbol_eval",
    "symbol_values",
    "symbol_table",
    "calibrate_fraclap",
]

_QUAD_OPTS = dict(epsabs=1e-15, epsrel=1e-13, limit=400)


@dataclass(frozen=True, eq=False)
class SymbolTable:
    """Symbol sampled on the frequency lattice of ``grid`` (FFT order)."""

    grid: GridSpec
    values: np.ndarray = dc_field(repr=False)
    kernel_id: str = ""
    quad_params: dict = dc_field(default_factory=dict)


@lru_cache(maxsize=None)
def ray_constant(sigma: float) -> complex:
    """``C = int_0^inf (exp(it) - 1 - i t chi(t)) t**(-1-sigma) dt``.

    ``chi`` is 0 for ``sigma < 1``, ``1_{t<1}`` for ``sigma == 1`` and 1 for
    ``sigma > 1``.
    """
    kind = compensator_kind(sigma)
    comp_in = 0.0 if kind is CompensatorKind.NONE else 1.0
    p = 1 if sigma < 1 else 2
    wvar = (p - 1 - sigma, 0.0)

    def part(fn):
        val, err = integrate.quad(fn, 0.0, 1.0, weight="alg", wvar=wvar, **_QUAD_OPTS)
        return val

    def g(t):
        t = max(t, 1e-100)  # endpoint evaluation; the limit is finite
        return phi(t, comp_in) / t**p

    inner = complex(part(lambda t: g(t).real), part(lambda t: g(t).imag))
    tail = lambda t: t ** (-1 - sigma)
    with warnings.catch_warnings():
        # QAWF flags its tightest cycles at this tolerance; the result is exact
        # to rounding for every order tested
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        cos_t, _ = integrate.quad(tail, 1.0, np.inf, weight="cos", wvar=1.0,
                                  limlst=200, epsabs=1e-15)
        sin_t, _ = integrate.quad(tail, 1.0, np.inf, weight="sin", wvar=1.0,
                                  limlst=200, epsabs=1e-15)
    outer = complex(cos_t - 1.0 / sigma, sin_t)
    if kind is CompensatorKind.FULL:
        outer -= 1j / (sigma - 1)
    return inner + outer


def radial_integral(sigma: float, s) -> np.ndarray:
    """``I(s)`` for real ``s`` (array)."""
    s = np.asarray(s, dtype=float)
    c = ray_constant(sigma)
    a = np.abs(s)
    if sigma == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a * c.real + 1j * s * (c.imag - np.log(a))
        return np.where(a == 0, 0.0, out)
    out = a**sigma * np.where(s >= 0, c, np.conj(c))
    return out


@lru_cache(maxsize=None)
def _angular_rule(n=16, ratio=0.15, levels=14):
    # graded toward pi/2 where cos changes sign, mirrored to the full circle
    edges = np.pi / 2 * (1 - ratio ** np.arange(levels + 1))
    edges = np.append(edges, np.pi / 2)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(a, b, n)
        xs.append(x)
        ws.append(w)
    q = np.concatenate(xs)
    w = np.concatenate(ws)
    phis = np.concatenate([q, np.pi - q, -q, q - np.pi])
    return phis, np.tile(w, 4)


def _far_amplitude(k: KernelSpec, theta):
    """Amplitude beyond ``far_radius`` along directions ``theta`` (angles in 2D)."""
    if k.truncated:
        return np.zeros(np.shape(theta))
    rr = 2 * max(k.far_radius, 1.0)
    x0 = np.zeros(k.dim)
    if k.dim == 1:
        return k.amp(x0, (np.asarray(theta, dtype=float) * rr)[..., None])
    th = np.asarray(theta, dtype=float)
    y = rr * np.stack([np.cos(th), np.sin(th)], axis=-1)
    return k.amp(x0, y)


def _near_radius(k: KernelSpec) -> float:
    return max(k.far_radius, 1.0 if k.truncated else 0.0)


def _far_part(k: KernelSpec, xi) -> np.ndarray:
    """Contribution of the ray-constant amplitude profile, closed form in ``r``."""
    sigma = k.sigma
    if k.truncated:
        return np.zeros(xi.shape[:-1], dtype=complex)
    if k.dim == 1:
        s = xi[..., 0]
        ap, am = _far_amplitude(k, np.array([1.0, -1.0]))
        return (2 - sigma) * (ap * radial_integral(sigma, s) + am * radial_integral(sigma, -s))
    rho = np.linalg.norm(xi, axis=-1)
    ang = np.arctan2(xi[..., 1], xi[..., 0])
    phis, w = _angular_rule()
    c = np.cos(phis)
    ic = radial_integral(sigma, c) * w
    logc = c * w
    flat_ang = ang.ravel()
    flat_rho = rho.ravel()
    out = np.empty(flat_ang.shape, dtype=complex)
    chunk = max(1, 2**22 // phis.size)
    for i in range(0, flat_ang.size, chunk):
        a = _far_amplitude(k, flat_ang[i:i + chunk, None] + phis[None, :])
        r = flat_rho[i:i + chunk]
        main = a @ ic
        if sigma == 1:
            with np.errstate(divide="ignore"):
                lg = np.where(r > 0, np.log(r), 0.0)
            out[i:i + chunk] = r * (main - 1j * lg * (a @ logc))
        else:
            out[i:i + chunk] = r**sigma * main
    return (2 - sigma) * out.reshape(rho.shape)


def _near_nodes(k: KernelSpec, rmax_xi: float, delta_scale: float = 1.0):
    """Radial rule on ``[0, R0]`` resolving frequencies up to ``rmax_xi``."""
    R0 = _near_radius(k)
    p = 1 if k.sigma < 1 else 2
    scale = 5.0 / max(rmax_xi, 1.0)
    delta = min(R0, scale) * delta_scale
    fixed = (1.0,) if k.sigma == 1 else ()
    return radial_rule(k.sigma, p, delta, R0, scale, fixed=fixed, n=20)


def _j0m1(z):
    """``J0(z) - 1`` accurate for small ``z``."""
    q = z * z / 4
    series = -q * (1 - q / 4 * (1 - q / 9 * (1 - q / 16)))
    return np.where(np.abs(z) < 0.1, series, j0(z) - 1.0)


def _near_part(k: KernelSpec, xi, delta_scale=1.0) -> np.ndarray:
    """Correction ``int_{|y|<R0} (...) (a - a_far) K dy`` by product quadrature."""
    shape = xi.shape[:-1]
    R0 = _near_radius(k)
    if R0 == 0:
        return np.zeros(shape, dtype=complex)
    sigma = k.sigma
    xin = np.linalg.norm(xi, axis=-1)
    r, w = _near_nodes(k, float(np.max(xin, initial=0.0)), delta_scale)
    comp = np.asarray([1.0 if (sigma > 1 or (sigma == 1 and ri < 1)) else 0.0 for ri in r])
    x0 = np.zeros(k.dim)
    if k.dim == 1:
        out = np.zeros(xin.size, dtype=complex)
        s = xi.reshape(-1)
        for sign in (1.0, -1.0):
            da = k.amp(x0, (sign * r)[:, None]) - _far_amplitude(k, np.array(sign))
            if not np.any(da):
                continue
            ph = phi(np.outer(s, sign * r), comp[None, :])
            out += ph @ (w * da)
        return (2 - sigma) * out.reshape(shape)
    # 2D: isotropic corrections reduce to a Bessel integral on |xi|
    probe = np.linspace(0, 2 * np.pi, 7, endpoint=False)
    pr = np.stack([np.cos(probe), np.sin(probe)], axis=-1)
    da = k.amp(x0, r[:, None, None] * pr[None]) - _far_amplitude(k, probe)[None, :]
    if np.allclose(da, da[:, :1], rtol=0, atol=1e-14):
        da = da[:, 0]
        uniq, inv = np.unique(xin.ravel(), return_inverse=True)
        vals = np.zeros(uniq.size, dtype=complex)
        chunk = max(1, 2**22 // max(r.size, 1))
        for i in range(0, uniq.size, chunk):
            z = np.outer(uniq[i:i + chunk], r)
            vals[i:i + chunk] = (2 * np.pi * _j0m1(z)) @ (w * da)
        return (2 - sigma) * vals[inv].reshape(shape)
    return (2 - sigma) * _near_part_2d_general(k, xi.reshape(-1, 2), r, w, comp).reshape(shape)


def _near_part_2d_general(k, xi, r, w, comp):
    # trapezoid in angle, sized for the largest |xi| r
    rho = float(np.max(np.linalg.norm(xi, axis=-1), initial=0.0))
    nt = int(4 * np.ceil((1.15 * rho * r.max() + 24) / 4))
    t = 2 * np.pi * np.arange(nt) / nt
    th = np.stack([np.cos(t), np.sin(t)], axis=-1)
    x0 = np.zeros(2)
    y = r[:, None, None] * th[None]
    da = k.amp(x0, y) - _far_amplitude(k, t)[None, :]
    wt = (w[:, None] * da * (2 * np.pi / nt)).ravel()
    yy = y.reshape(-1, 2)
    cc = np.repeat(comp, nt)
    out = np.empty(xi.shape[0], dtype=complex)
    chunk = max(1, 2**22 // yy.shape[0])
    for i in range(0, xi.shape[0], chunk):
        dot = xi[i:i + chunk] @ yy.T
        out[i:i + chunk] = phi(dot, cc[None, :]) @ wt
    return out


_validated: dict = {}


def _check_kernel(k: KernelSpec):
    if k.x_dependent:
        raise DomainError("symbols exist only for x-independent kernels")
    if id(k) not in _validated:
        k.validate()
        _validated[id(k)] = k


def symbol_values(k: KernelSpec, xi, delta_scale: float = 1.0) -> np.ndarray:
    """Symbol at an array of frequencies with the spatial axis last."""
    _check_kernel(k)
    xi = np.asarray(xi, dtype=float)
    if k.dim == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
        xi = xi[..., None]
    if xi.shape[-1] != k.dim:
        raise DomainError(f"frequency must have {k.dim} components")
    if not np.all(np.isfinite(xi)):
        raise DomainError("frequency must be finite")
    out = _far_part(k, xi) + _near_part(k, xi, delta_scale)
    zero = np.all(xi == 0, axis=-1)
    return np.where(zero, 0.0, out)


def symbol_eval(k: KernelSpec, xi) -> complex:
    """Symbol at a single frequency (scalar in 1D, pair in 2D).

    Raises
    ------
    DomainError
        For x-dependent kernels or non-finite frequencies.
    InvalidKernelError
        For ``sigma == 1`` kernels violating cancellation.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return complex(symbol_values(k, xi[None, :])[0])


def symbol_table(k: KernelSpec, grid: GridSpec, delta_scale: float = 1.0) -> SymbolTable:
    """Tabulate the symbol on the lattice of ``grid``.

    Conjugate pairs are averaged so that ``m(-xi) = conj m(xi)`` exactly,
    ``m(0)`` is set to zero and round-off positive real parts are removed.
    """
    if grid.dim != k.dim:
        raise DomainError(f"kernel dim {k.dim} differs from grid dim {grid.dim}")
    xi = np.stack(grid.xi(), axis=-1)
    vals = symbol_values(k, xi, delta_scale)
    flip = vals
    for ax in range(grid.dim):
        flip = np.roll(np.flip(flip, axis=ax), 1, axis=ax)
    vals = 0.5 * (vals + np.conj(flip))
    vals[(0,) * grid.dim] = 0.0
    scale = np.max(np.abs(vals), initial=1.0)
    if np.any(vals.real > 1e-9 * scale):
        raise AccuracyError("symbol has a positive real part beyond round-off",
                            residual=float(np.max(vals.real)))
    vals = np.where(vals.real > 0, 1j * vals.imag, vals)
    R0 = _near_radius(k)
    params = {"method": "ray-constant", "near_radius": R0,
              "delta_scale": delta_scale, "angular_nodes": int(_angular_rule()[0].size)}
    return SymbolTable(grid, vals, kernel_id=f"{k.name}(sigma={k.sigma:g})", quad_params=params)


@lru_cache(maxsize=None)
def calibrate_fraclap(dim: int, sigma: float) -> float:
    """Constant ``c`` with symbol ``-|xi|**sigma`` for ``K = c / |y|**(d+sigma)``.

    Raises
    ------
    AccuracyError
        If the calibrated symbol misses ``-2**sigma`` at ``|xi| = 2`` by more
        than ``1e-8`` relative.
    """
    if not 0 < sigma < 2:
        raise DomainError(f"sigma must lie in (0, 2), got {sigma}")
    unit = lambda x, y: np.ones(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]))
    k1 = KernelSpec(sigma, unit, 1.0, 1.0, dim, name="unit")
    e1 = np.zeros(dim)
    e1[0] = 1.0
    m1 = symbol_eval(k1, e1)
    c = -(2 - sigma) / m1.real
    kc = KernelSpec(sigma, lambda x, y: c / (2 - sigma) * unit(x, y),
                    c / (2 - sigma), c / (2 - sigma), dim, name="fraclap")
    m2 = symbol_eval(kc, 2 * e1)
    target = -(2.0**sigma)
    res = abs(m2 - target) / abs(target)
    if res > 1e-8:
        raise AccuracyError(f"fraclap calibration residual {res:.3g}", residual=res)
    return float(c)
