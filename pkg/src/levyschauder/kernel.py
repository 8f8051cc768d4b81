"""Jump kernels ``K(x, y) = (2 - sigma) a(x, y) / |y|**(d + sigma)``.

A kernel is described by its amplitude ``a`` together with the order and
the ellipticity bounds.  The factor ``2 - sigma`` is kept outside ``a`` so
that the limit ``sigma -> 2`` can be studied without rescaling.

Amplitudes are callables ``a(x, y)`` taking arrays whose trailing axis has
length ``dim`` and broadcasting over the leading axes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import DomainError, InvalidKernelError

__all__ = [
    "CompensatorKind",
    "KernelSpec",
    "EllipticityReport",
    "compensator_kind",
    "compensator",
    "ellipticity_check",
    "cancellation_defect",
    "builtin_kernel",
    "parse_kernel_name",
    "BUILTIN_KERNELS",
    "xdep_profile",
    "CANCELLATION_RADII",
]

TOL = 1e-12
CANCELLATION_RADII = 2.0 ** np.arange(-8, 4)
_SAMPLE_X_SPAN = 2 * np.pi
_SAMPLE_R_RANGE = (2.0**-8, 2.0**3)


class CompensatorKind(Enum):
    NONE = "none"
    UNIT_BALL = "unit_ball"
    FULL = "full"


def _check_sigma(sigma):
    if not (np.isfinite(sigma) and 0 < sigma < 2):
        raise DomainError(f"sigma must lie in (0, 2), got {sigma}")


def compensator_kind(sigma: float) -> CompensatorKind:
    _check_sigma(sigma)
    if sigma < 1:
        return CompensatorKind.NONE
    if sigma == 1:
        return CompensatorKind.UNIT_BALL
    return CompensatorKind.FULL


def compensator(sigma: float, y) -> np.ndarray:
    """Gradient-correction indicator evaluated at points ``y``.

    Parameters
    ----------
    sigma : float
        Order in ``(0, 2)``.
    y : array_like
        Points with the spatial axis last; a scalar is read as a 1D point.

    Returns
    -------
    ndarray
        Zeros for ``sigma < 1``, the unit-ball indicator for ``sigma == 1``
        and ones for ``sigma > 1``.
    """
    kind = compensator_kind(sigma)
    y = np.asarray(y, dtype=float)
    r = np.abs(y) if y.ndim == 0 else np.linalg.norm(y, axis=-1)
    if kind is CompensatorKind.NONE:
        return np.zeros_like(r)
    if kind is CompensatorKind.FULL:
        return np.ones_like(r)
    return (r < 1).astype(float)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Jump kernel of order ``sigma``.

    Parameters
    ----------
    sigma : float
        Order in ``(0, 2)``.
    amplitude : callable
        ``a(x, y)``; nonnegative, bounded by ``nu`` and ``lambda_upper``.
    nu, lambda_upper : float
        Ellipticity bounds, ``0 <= nu <= lambda_upper``.
    dim : {1, 2}
    x_dependent : bool
        Whether ``a`` depends on ``x``.
    truncated : bool
        If set the amplitude is forced to zero on ``|y| > 1`` and the lower
        bound is only required inside the unit ball.
    far_radius : float
        Radius beyond which ``a(x, y)`` depends on ``y`` only through
        ``y/|y|``.  Quadrature treats the region outside it in closed form.
    name : str
        Label used in reports.
    """

    sigma: float
    amplitude: Callable
    nu: float
    lambda_upper: float
    dim: int = 1
    x_dependent: bool = False
    truncated: bool = False
    far_radius: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        _check_sigma(self.sigma)
        if self.dim not in (1, 2):
            raise DomainError(f"dim must be 1 or 2, got {self.dim}")
        if not (0 <= self.nu <= self.lambda_upper < np.inf):
            raise InvalidKernelError(
                f"need 0 <= nu <= lambda_upper < inf, got nu={self.nu}, "
                f"lambda_upper={self.lambda_upper}")
        if not self.far_radius >= 0:
            raise DomainError("far_radius must be nonnegative")

    @property
    def compensator_kind(self) -> CompensatorKind:
        return compensator_kind(self.sigma)

    def amp(self, x, y) -> np.ndarray:
        """Effective amplitude, truncation applied."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        a = np.broadcast_to(np.asarray(self.amplitude(x, y), dtype=float), shape)
        if self.truncated:
            # closed unit ball; the slack keeps sphere samples at r = 1 inside
            a = np.where(np.linalg.norm(y, axis=-1) <= 1 + 1e-12, a, 0.0)
        return a

    def kernel(self, x, y) -> np.ndarray:
        """``K(x, y)``; infinite at ``y = 0``."""
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1)
        with np.errstate(divide="ignore"):
            return (2 - self.sigma) * self.amp(x, y) / r ** (self.dim + self.sigma)

    def frozen(self, x0) -> "KernelSpec":
        """x-independent kernel with amplitude ``a(x0, .)``."""
        x0 = np.broadcast_to(np.asarray(x0, dtype=float), (self.dim,)).copy()
        a = self.amplitude
        return replace(self, amplitude=lambda x, y: a(x0, y), x_dependent=False,
                       name=f"{self.name}@x0")

    def validate(self, sample_count: int = 512) -> "KernelSpec":
        """Raise :class:`InvalidKernelError` unless the kernel is admissible.

        Checks ellipticity on a deterministic sample, constancy along rays
        beyond ``far_radius`` and, for ``sigma == 1``, cancellation at the
        dyadic radii ``2**-8 .. 2**3``.
        """
        rep = ellipticity_check(self, sample_count)
        if not rep.passed:
            raise InvalidKernelError(
                f"{self.name}: amplitude range [{rep.min_ratio:.6g}, "
                f"{rep.max_ratio:.6g}] violates bounds [{self.nu}, {self.lambda_upper}]")
        self._check_rays()
        if self.sigma == 1:
            self._check_cancellation()
        return self

    def _sample_x(self, count):
        pts = qmc.Halton(d=self.dim, scramble=False).random(count + 1)[1:]
        return pts * _SAMPLE_X_SPAN

    def _directions(self, count):
        if self.dim == 1:
            return np.array([[1.0], [-1.0]])
        t = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(t), np.sin(t)], axis=-1)

    def _check_rays(self):
        if self.truncated:
            return
        r0 = max(self.far_radius, 1e-3)
        xs = self._sample_x(4)[:, None, None, :]
        th = self._directions(12)[None, :, None, :]
        scales = np.array([1.0, 1.5, 2.0, 10.0, 1e3])[None, None, :, None]
        a = self.amp(xs, th * (2 * r0) * scales)
        ref = a[..., :1]
        if not np.allclose(a, ref, rtol=1e-12, atol=1e-12 * self.lambda_upper):
            raise InvalidKernelError(
                f"{self.name}: amplitude varies along rays beyond far_radius={self.far_radius}")

    def _check_cancellation(self):
        scale = (2 - self.sigma) * max(self.lambda_upper, 1e-300)
        for x in self._sample_x(4):
            for r in CANCELLATION_RADII:
                d = cancellation_defect(self, x, r)
                if np.max(np.abs(d)) > 1e-10 * scale * r ** -self.sigma * (2 * np.pi) ** (self.dim - 1):
                    raise InvalidKernelError(
                        f"{self.name}: cancellation fails at x={x.tolist()}, r={r:g}: "
                        f"defect {d.tolist()}")


@dataclass(frozen=True)
class EllipticityReport:
    min_ratio: float
    max_ratio: float
    passed: bool
    sample_count: int


def ellipticity_check(k: KernelSpec, sample_count: int = 512) -> EllipticityReport:
    """Compare the amplitude against ``[nu, lambda_upper]`` on a Halton sample.

    ``x`` ranges over ``[0, 2*pi)**d``, ``|y|`` is log-uniform on
    ``[2**-8, 2**3]`` and the direction is uniform.  For truncated kernels the
    lower bound is only tested on ``|y| < 1``.

    Raises
    ------
    InvalidKernelError
        If the amplitude is negative or non-finite at a sample point.
    """
    if sample_count < 1:
        raise DomainError("sample_count must be at least 1")
    d = k.dim
    pts = qmc.Halton(d=d + 2, scramble=False).random(sample_count)
    x = pts[:, :d] * _SAMPLE_X_SPAN
    lo, hi = np.log(_SAMPLE_R_RANGE)
    r = np.exp(lo + (hi - lo) * pts[:, d])
    if d == 1:
        y = (r * np.where(pts[:, d + 1] < 0.5, 1.0, -1.0))[:, None]
    else:
        t = 2 * np.pi * pts[:, d + 1]
        y = np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
    a = k.amp(x, y)
    bad = ~np.isfinite(a) | (a < 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise InvalidKernelError(
            f"{k.name}: amplitude {a[i]!r} at x={x[i].tolist()}, y={y[i].tolist()}")
    inside = r < 1 if k.truncated else np.ones_like(r, dtype=bool)
    amin = float(np.min(a[inside])) if np.any(inside) else k.nu
    amax = float(np.max(a))
    ok = amin >= k.nu - TOL and amax <= k.lambda_upper + TOL
    return EllipticityReport(amin, amax, bool(ok), sample_count)


def cancellation_defect(k: KernelSpec, x, r: float) -> np.ndarray:
    """First moment ``int_{|y|=r} y K(x, y) dS`` of the kernel on a sphere.

    In 1D this is the two-point sum ``r K(x, r) - r K(x, -r)``; in 2D the
    trapezoid rule with 256 nodes on the circle.
    """
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    x = np.broadcast_to(np.asarray(x, dtype=float), (k.dim,))
    if k.dim == 1:
        y = np.array([[r], [-r]])
        kv = k.kernel(x, y)
        return np.array([r * kv[0] - r * kv[1]])
    m = 256
    t = 2 * np.pi * np.arange(m) / m
    th = np.stack([np.cos(t), np.sin(t)], axis=-1)
    kv = k.kernel(x, r * th)
    return (r * th * kv[:, None]).sum(axis=0) * r * (2 * np.pi / m)


# built-in kernels ---------------------------------------------------------

def _const(value):
    def a(x, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
        return np.full(shape, value)
    return a


def _angle(y):
    return np.arctan2(y[..., 1], y[..., 0])


def xdep_profile(x) -> np.ndarray:
    """Smooth periodic profile ``g(x) = -cos(x_1)``, minimal at the origin."""
    return -np.cos(np.asarray(x, dtype=float)[..., 0])


def _fraclap(sigma, dim, eps):
    from .symbol import calibrate_fraclap

    c = calibrate_fraclap(dim, sigma)
    val = c / (2 - sigma)
    return KernelSpec(sigma, _const(val), val, val, dim, name="fraclap")


def _aniso2d(sigma, dim, eps):
    def a(x, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
        return np.broadcast_to(1 + 0.5 * np.cos(2 * _angle(np.asarray(y))), shape)
    return KernelSpec(sigma, a, 0.5, 1.5, 2, name="aniso2d")


def _nonsym1d(sigma, dim, eps):
    if sigma == 1:
        raise InvalidKernelError("nonsym1d violates cancellation at sigma = 1")

    def a(x, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
        return np.broadcast_to(1 + 0.5 * np.sign(np.asarray(y)[..., 0]), shape)
    return KernelSpec(sigma, a, 0.5, 1.5, 1, name="nonsym1d")


def _truncated(sigma, dim, eps):
    return KernelSpec(sigma, _const(1.0), 1.0, 1.0, dim, truncated=True,
                      name="truncated")


def _xdep(sigma, dim, eps):
    eps = 0.1 if eps is None else float(eps)
    if not 0 <= eps < 1:
        raise DomainError(f"xdep needs 0 <= eps < 1, got {eps}")

    def a(x, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
        return np.broadcast_to(1 + eps * xdep_profile(x), shape)
    return KernelSpec(sigma, a, 1 - eps, 1 + eps, dim, x_dependent=True,
                      name=f"xdep({eps:g})")


BUILTIN_KERNELS = {
    "fraclap": _fraclap,
    "aniso2d": _aniso2d,
    "nonsym1d": _nonsym1d,
    "truncated": _truncated,
    "xdep": _xdep,
}

_NAME_RE = re.compile(r"^\s*([a-z0-9]+)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*$")


def parse_kernel_name(text: str) -> tuple:
    """Split ``'xdep(0.1)'`` into ``('xdep', 0.1)``."""
    m = _NAME_RE.match(text)
    if not m or m.group(1) not in BUILTIN_KERNELS:
        raise DomainError(
            f"unknown kernel {text!r}; choose from {sorted(BUILTIN_KERNELS)}")
    eps = float(m.group(2)) if m.group(2) is not None else None
    return m.group(1), eps


def builtin_kernel(name: str, sigma: float, dim: int | None = None,
                   eps: float | None = None) -> KernelSpec:
    """Construct and validate a named kernel.

    Parameters
    ----------
    name : str
        One of ``fraclap``, ``aniso2d``, ``nonsym1d``, ``truncated`` or
        ``xdep``; ``'xdep(0.2)'`` is accepted as shorthand for ``eps=0.2``.
    sigma : float
    dim : int, optional
        Defaults to 2 for ``aniso2d`` and 1 otherwise.
    eps : float, optional
        Perturbation size for ``xdep``.
    """
    base, parsed = parse_kernel_name(name)
    if eps is None:
        eps = parsed
    if dim is None:
        dim = 2 if base == "aniso2d" else 1
    if base == "aniso2d" and dim != 2:
        raise DomainError("aniso2d is two-dimensional")
    if base == "nonsym1d" and dim != 1:
        raise DomainError("nonsym1d is one-dimensional")
    _check_sigma(sigma)
    return BUILTIN_KERNELS[base](sigma, dim, eps).validate()
