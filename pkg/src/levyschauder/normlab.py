"""Function-space measurements on periodic grids.

Every supremum is taken over grid pairs or dyadic grid-multiple steps;
continuum norms are only approached under refinement.  In 2D the pair
offsets are subsampled to dyadic multiples of 16 integer directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import DomainError
from .field import Field, GridSpec, shift
from .operator import extension_derivative

__all__ = [
    "DIRECTIONS_2D",
    "holder_seminorm",
    "campanato_sequence",
    "zygmund_seminorm_secdiff",
    "zygmund_seminorm_extension",
    "zygmund_norm",
    "log_lipschitz_constant",
    "lipschitz_constant",
    "difference_quotient",
    "ModulusData",
    "modulus_of_continuity",
    "dini_integral",
    "dini_transform",
    "NormReport",
    "norm_report",
]

DIRECTIONS_2D = ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2),
                 (3, 1), (1, 3), (3, -1), (1, -3), (3, 2), (2, 3), (3, -2), (2, -3))


def _torus_dist(grid: GridSpec, m) -> float:
    P, h = grid.period, grid.spacing
    d2 = 0.0
    for mi in np.atleast_1d(m):
        t = abs(mi * h) % P
        d2 += min(t, P - t) ** 2
    return math.sqrt(d2)


def _offsets(grid: GridSpec, max_dist: float, dyadic_1d: bool = False):
    """Integer offsets with torus distance in ``(0, max_dist]`` and their distances."""
    out = []
    if grid.dim == 1:
        ms = (2 ** np.arange(int(np.log2(grid.n)) + 1) if dyadic_1d
              else np.arange(1, grid.n // 2 + 1))
        for m in ms:
            d = _torus_dist(grid, m)
            if 0 < d <= max_dist + 1e-12:
                out.append(((int(m),), d))
        return out
    for e in DIRECTIONS_2D:
        j = 0
        while True:
            m = (e[0] * 2**j, e[1] * 2**j)
            if max(abs(m[0]), abs(m[1])) > grid.n // 2:
                break
            d = _torus_dist(grid, m)
            if 0 < d <= max_dist + 1e-12:
                out.append((m, d))
            j += 1
    return out


def _roll(v, m):
    return np.roll(v, tuple(-mi for mi in m), axis=tuple(range(len(m))))


def holder_seminorm(f: Field, alpha: float) -> float:
    """``sup |f(x) - f(y)| / dist(x, y)**alpha`` over grid pairs.

    Distances use the torus metric and are restricted to ``(0, period/2]``.
    In 1D every pair is visited; in 2D offsets are the dyadic multiples of
    :data:`DIRECTIONS_2D`.
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    v = f.values
    best = 0.0
    for m, d in _offsets(f.grid, f.grid.period / 2):
        best = max(best, float(np.max(np.abs(_roll(v, m) - v))) / d**alpha)
    return best


def lipschitz_constant(f: Field) -> float:
    """Holder seminorm of order one."""
    return holder_seminorm(f, 1.0)


def log_lipschitz_constant(f: Field) -> float:
    """``sup |f(x) - f(y)| / (d |log d|)`` over grid pairs with ``d <= 1/2``."""
    v = f.values
    best = 0.0
    for m, d in _offsets(f.grid, 0.5):
        lg = abs(math.log(d))
        if lg < 1e-6:
            continue
        best = max(best, float(np.max(np.abs(_roll(v, m) - v))) / (d * lg))
    return best


def difference_quotient(f: Field, beta: float, h) -> Field:
    """``|h|**-beta (f(. + h) - f)`` with the spectral shift."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    nh = float(np.linalg.norm(h))
    if nh == 0:
        raise DomainError("step h must be nonzero")
    return (shift(f, h) - f) * nh**-beta


def campanato_sequence(f: Field, l_min: int | None = None, l_max: int | None = None,
                       max_work: float = 4e7) -> dict:
    """Mean oscillations ``M_l = sup_x0 mean_{B(x0, 2**l)} |f - f_B|``.

    Balls are torus balls centred at grid points; ball means come from
    prefix sums (1D) or a summed-area table of the disc mask (2D).  In 2D the
    centres are strided so that the work stays below ``max_work`` point
    visits.

    Parameters
    ----------
    f : Field
    l_min, l_max : int, optional
        Dyadic exponent range; defaults span the spacing to ``period/2``.

    Returns
    -------
    dict
        ``{l: M_l}``.
    """
    g = f.grid
    cap = g.period / 2
    if l_max is None:
        l_max = int(math.floor(math.log2(cap)))
    if l_min is None:
        l_min = int(math.ceil(math.log2(g.spacing)))
    if 2.0**l_max > cap * (1 + 1e-12):
        raise DomainError(f"radius 2**{l_max} exceeds period/2 = {cap}")
    out = {}
    for l in range(l_min, l_max + 1):
        r = 2.0**l
        out[l] = _campanato_1d(f.values, g, r) if g.dim == 1 else _campanato_2d(f.values, g, r, max_work)
    return out


def _campanato_1d(v, g, r):
    n = g.n
    w = int(math.floor(r / g.spacing + 1e-9))
    size = min(2 * w + 1, n)
    ext = np.concatenate([v, v[: size - 1]])
    c = np.concatenate([[0.0], np.cumsum(ext)])
    means = (c[size:size + n] - c[:n]) / size
    win = np.lib.stride_tricks.sliding_window_view(ext, size)[:n]
    osc = np.mean(np.abs(win - means[:, None]), axis=1)
    return float(np.max(osc))


def _campanato_2d(v, g, r, max_work):
    n = g.n
    w = int(math.floor(r / g.spacing + 1e-9))
    off = np.arange(-w, w + 1)
    ox, oy = np.meshgrid(off, off, indexing="ij")
    keep = (ox * g.spacing) ** 2 + (oy * g.spacing) ** 2 <= r * r * (1 + 1e-12)
    ox, oy = ox[keep], oy[keep]
    # duplicate grid points when the ball wraps are counted once
    lin = np.unique((ox % n) * n + (oy % n))
    ox, oy = lin // n, lin % n
    stride = max(1, int(math.ceil(math.sqrt(n * n * lin.size / max_work))))
    cx, cy = np.meshgrid(np.arange(0, n, stride), np.arange(0, n, stride), indexing="ij")
    cx, cy = cx.ravel(), cy.ravel()
    best = 0.0
    chunk = max(1, int(4e6 // lin.size))
    for i in range(0, cx.size, chunk):
        vals = v[(cx[i:i + chunk, None] + ox[None]) % n, (cy[i:i + chunk, None] + oy[None]) % n]
        m = vals.mean(axis=1, keepdims=True)
        best = max(best, float(np.max(np.mean(np.abs(vals - m), axis=1))))
    return best


def _dyadic_steps(g: GridSpec):
    steps = []
    m = 1
    while m * g.spacing <= g.period / 4 * (1 + 1e-12):
        if g.dim == 1:
            steps.append(((m,), m * g.spacing))
        else:
            for e in ((1, 0), (0, 1), (1, 1), (1, -1)):
                mm = (e[0] * m, e[1] * m)
                d = _torus_dist(g, mm)
                if d <= g.period / 4 * (1 + 1e-12):
                    steps.append((mm, d))
        m *= 2
    return steps


def zygmund_seminorm_secdiff(f: Field, alpha: float) -> float:
    """``sup |f(x+h) + f(x-h) - 2 f(x)| / |h|**alpha`` over dyadic grid steps.

    Steps range over ``|h| in [spacing, period/4]`` (axes and diagonals in 2D).
    """
    if not 0 < alpha < 2:
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
    v = f.values
    best = 0.0
    for m, d in _dyadic_steps(f.grid):
        neg = tuple(-mi for mi in m)
        dd = _roll(v, m) + _roll(v, neg) - 2 * v
        best = max(best, float(np.max(np.abs(dd))) / d**alpha)
    return best


def zygmund_seminorm_extension(f: Field, alpha: float, k: int | None = None,
                               points: int = 96) -> float:
    """``sup_y y**(k - alpha) ||D_y^k U(., y)||_inf`` over a log grid of heights.

    ``U`` is the Poisson extension and ``k`` defaults to the smallest integer
    above ``alpha``.  Heights span ``[spacing/4, period]``.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if k is None:
        k = int(math.floor(alpha)) + 1
    if k <= alpha:
        raise DomainError(f"order k={k} must exceed alpha={alpha}")
    g = f.grid
    ys = np.geomspace(g.spacing / 4, g.period, points)
    best = 0.0
    for y in ys:
        best = max(best, y ** (k - alpha) * extension_derivative(f, y, k).sup_norm())
    return best


def zygmund_norm(f: Field, alpha: float, route: str = "extension") -> float:
    """``||f||_inf`` plus the seminorm from the chosen route."""
    if route == "extension":
        return f.sup_norm() + zygmund_seminorm_extension(f, alpha)
    if route == "secdiff":
        return f.sup_norm() + zygmund_seminorm_secdiff(f, alpha)
    raise DomainError(f"unknown route {route!r}")


# moduli of continuity -------------------------------------------------------

@dataclass
class ModulusData:
    """Sampled modulus of continuity.

    Attributes
    ----------
    radii : ndarray
        Increasing sample radii.
    omega : ndarray
        Values of the modulus at ``radii``.
    dini_integral : float or None
        Filled by :func:`dini_integral`.
    converged : bool or None
        Heuristic Dini flag, see :func:`dini_integral`.
    """

    radii: np.ndarray
    omega: np.ndarray
    dini_integral: float | None = None
    converged: bool | None = None

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.radii.shape != self.omega.shape or self.radii.ndim != 1:
            raise DomainError("radii and omega must be matching 1D arrays")
        if np.any(np.diff(self.radii) <= 0) or np.any(self.radii <= 0):
            raise DomainError("radii must be positive and increasing")

    @classmethod
    def from_model(cls, func, radii) -> "ModulusData":
        r = np.asarray(radii, dtype=float)
        return cls(r, func(r))

    def __call__(self, s):
        """Log-log interpolation; power-law extrapolation below, held above."""
        s = np.asarray(s, dtype=float)
        r, w = self.radii, self.omega
        out = np.empty_like(s)
        top = s >= r[-1]
        out[top] = w[-1]
        low = s < r[0]
        p = _slope(r[0], r[1], w[0], w[1]) if r.size > 1 else 0.0
        out[low] = w[0] * (s[low] / r[0]) ** p
        mid = ~(top | low)
        if np.any(mid):
            lw = np.log(np.maximum(w, 1e-300))
            out[mid] = np.exp(np.interp(np.log(s[mid]), np.log(r), lw))
        return out


def _slope(r0, r1, w0, w1):
    if w0 <= 0 or w1 <= 0:
        return 0.0
    return math.log(w1 / w0) / math.log(r1 / r0)


def modulus_of_continuity(f: Field, radii=None) -> ModulusData:
    """``omega(r) = max |f(x) - f(y)|`` over grid pairs with ``dist <= r``.

    Radii default to the dyadic multiples of the spacing up to ``period/2``.
    """
    g = f.grid
    if radii is None:
        radii = g.spacing * 2.0 ** np.arange(int(np.log2(g.n // 2)) + 1)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii > g.period / 2 * (1 + 1e-12)):
        raise DomainError("radii must not exceed period/2")
    offs = sorted(_offsets(g, g.period / 2), key=lambda t: t[1])
    dists = np.array([d for _, d in offs])
    osc = np.array([float(np.max(np.abs(_roll(f.values, m) - f.values))) for m, _ in offs])
    cum = np.maximum.accumulate(osc)
    idx = np.searchsorted(dists, radii * (1 + 1e-12), side="right") - 1
    omega = np.where(idx >= 0, cum[np.maximum(idx, 0)], 0.0)
    return ModulusData(radii, omega)


def dini_integral(m: ModulusData) -> tuple:
    """Estimate ``int_0^R omega(s)/s ds`` and flag Dini convergence.

    Between samples ``omega`` is interpolated as a piecewise power law and
    integrated exactly.  Below the smallest radius two models are fitted to
    the samples in the smallest two decades: ``C s**p`` and
    ``C log(1/s)**-q``.  The better fit decides the flag: convergence
    requires ``p > 0.02`` for the power law and ``q > 1.05`` for the
    logarithmic model.  The flag is a heuristic on finite data.

    Returns
    -------
    value : float
        Integral estimate, ``inf`` when the flag is false.
    converged : bool
    """
    r, w = m.radii, m.omega
    body = 0.0
    for r0, r1, w0, w1 in zip(r[:-1], r[1:], w[:-1], w[1:]):
        p = _slope(r0, r1, w0, w1)
        L = math.log(r1 / r0)
        if abs(p) < 1e-12:
            body += w0 * L
        else:
            body += w0 * (math.expm1(p * L)) / p
    sel = r <= r[0] * 100
    if sel.sum() < 3:
        sel = np.arange(r.size) < min(r.size, 3)
    rs, ws = r[sel], w[sel]
    if np.all(ws <= 0):
        m.dini_integral, m.converged = body, True
        return body, True
    ws = np.maximum(ws, 1e-300)
    X1 = np.log(rs)
    c1, res1 = _fit(X1, np.log(ws))
    small = rs < 0.5
    if small.sum() >= 2:
        X2 = np.log(np.log(1 / rs[small]))
        c2, res2 = _fit(X2, np.log(ws[small]))
    else:
        c2, res2 = (0.0, 0.0), np.inf
    if res1 <= res2:
        p = c1[1]
        ok = p > 0.02
        head = w[0] / p if ok else math.inf
    else:
        q = -c2[1]
        ok = q > 1.05
        Lg = math.log(1 / r[0])
        head = w[0] * Lg / (q - 1) if ok else math.inf
    value = float(body + head) if ok else math.inf
    m.dini_integral, m.converged = value, bool(ok)
    return value, bool(ok)


def _fit(X, Y):
    A = np.stack([np.ones_like(X), X], axis=1)
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - Y) ** 2)))
    return coef, res


def dini_transform(m: ModulusData, a: float, b: float) -> ModulusData:
    """``sum_k a**k omega(b**k t)`` at the sample radii.

    Terms with ``b**k t`` beyond the largest radius use the top value of
    ``omega``; their geometric tail is summed in closed form.
    """
    if not (0 < a < 1 and b > 1):
        raise DomainError(f"need 0 < a < 1 and b > 1, got a={a}, b={b}")
    top = m.omega[-1]
    rmax = m.radii[-1]
    out = np.empty_like(m.omega)
    for i, t in enumerate(m.radii):
        K = int(math.floor(math.log(rmax / t) / math.log(b))) + 1 if t < rmax else 0
        k = np.arange(K)
        s = float(np.sum(a**k * m(t * b**k))) if K else 0.0
        out[i] = s + top * a**K / (1 - a)
    return ModulusData(m.radii.copy(), out)


# reports --------------------------------------------------------------------

@dataclass
class NormReport:
    """All measurements for one field; keys of :meth:`to_dict` match the fields."""

    holder: dict
    zygmund_secdiff: dict
    zygmund_ext: dict
    campanato: dict
    log_lip: float
    sup_norm: float

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("holder", "zygmund_secdiff", "zygmund_ext", "campanato"):
            d[key] = {str(k): v for k, v in d[key].items()}
        return d


def norm_report(f: Field, alphas=(0.3, 0.5, 0.7, 1.0)) -> NormReport:
    """Evaluate every seminorm at each ``alpha``; ``None`` where undefined."""
    holder, sec, ext = {}, {}, {}
    for a in alphas:
        a = float(a)
        holder[a] = holder_seminorm(f, a) if 0 < a <= 1 else None
        sec[a] = zygmund_seminorm_secdiff(f, a) if 0 < a < 2 else None
        ext[a] = zygmund_seminorm_extension(f, a) if a > 0 else None
    return NormReport(holder, sec, ext, campanato_sequence(f),
                      log_lipschitz_constant(f), f.sup_norm())
