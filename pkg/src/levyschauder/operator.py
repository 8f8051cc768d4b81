"""Application of the non-local operator to periodic fields.

Two independent routes are provided.  :func:`apply_spectral` multiplies by a
tabulated symbol.  :func:`apply_quadrature` evaluates the defining integral
``int (u(x+y) - u(x) - y.grad u(x) chi(y)) K(x, y) dy`` directly, using the
trigonometric interpolant of ``u`` for off-grid values.

Quadrature layout
-----------------
The kernel is split with a smooth radial cutoff
``psi(r) = erfc((r - r_c)/s)/2``.  The near part ``psi K`` is integrated by a
Gauss-Jacobi rule at the origin followed by Gauss-Legendre panels and, in
2D, a trapezoid rule in angle.  The far part ``(1 - psi) K`` is smooth, so
its action on the mean-free part of ``u`` is the correlation with the
periodized far kernel, sampled on an oversampled grid.  The lattice tail of
that periodization is summed with the Hurwitz zeta function in 1D and by a
smooth radial window in 2D.  Zeroth- and first-moment terms of the far
kernel are added in closed form.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import erfc, zeta

from ._quadrature import phi, radial_rule, panel_rule, gauss_jacobi
from .errors import AccuracyError, DomainError, GridMismatchError
from .field import Field, GridSpec, apply_multiplier
from .kernel import KernelSpec
from .symbol import SymbolTable

__all__ = [
    "apply_spectral",
    "apply_quadrature",
    "apply_quadrature_function",
    "fractional_laplacian",
    "poisson_extend",
    "extension_derivative",
    "commutator",
    "cutoff",
    "QuadratureLayout",
]


def apply_spectral(t: SymbolTable, u: Field) -> Field:
    """Multiply the spectrum of ``u`` by the symbol table."""
    if t.grid != u.grid:
        raise GridMismatchError(f"symbol grid {t.grid} differs from field grid {u.grid}")
    return apply_multiplier(u, t.values)


def fractional_laplacian(s: float, u: Field) -> Field:
    """``(-Delta)**(s/2) u``, the multiplier ``|xi|**s`` (positive sign)."""
    if not (np.isfinite(s) and 0 < s <= 2):
        raise DomainError(f"order must lie in (0, 2], got {s}")
    return apply_multiplier(u, u.grid.xi_norm() ** s)


def poisson_extend(u: Field, y: float) -> Field:
    """Harmonic extension ``U(., y)``: multiplier ``exp(-|xi| y)``."""
    if not y > 0:
        raise DomainError(f"height must be positive, got {y}")
    return apply_multiplier(u, np.exp(-u.grid.xi_norm() * y))


def extension_derivative(u: Field, y: float, k: int) -> Field:
    """``D_y^k U(., y)``: multiplier ``(-|xi|)**k exp(-|xi| y)``."""
    if not y > 0:
        raise DomainError(f"height must be positive, got {y}")
    if int(k) != k or k < 1:
        raise DomainError(f"derivative order must be a positive integer, got {k}")
    xn = u.grid.xi_norm()
    return apply_multiplier(u, (-xn) ** int(k) * np.exp(-xn * y))


# direct quadrature ---------------------------------------------------------

class QuadratureLayout:
    """Node layout and far-field data for one kernel on one grid."""

    def __init__(self, k: KernelSpec, grid: GridSpec):
        if k.dim != grid.dim:
            raise GridMismatchError(f"kernel dim {k.dim} differs from grid dim {grid.dim}")
        if k.x_dependent and k.dim == 2:
            raise DomainError("x-dependent kernels are supported in one dimension only")
        self.k = k
        self.grid = grid
        sigma = k.sigma
        h = grid.spacing
        d = grid.dim
        self.xi_max = np.sqrt(d) * np.pi / h
        if k.truncated:
            self.r0 = 1.0
            self.s = None
            self.r_end = 1.0
        else:
            self.r0 = max(1.0, k.far_radius)
            self.s = self.r0 / 8
            self.r_c = self.r0 + 6 * self.s
            self.r_end = self.r_c + 7 * self.s
        p = 1 if sigma < 1 else 2
        delta = min(2 * h, self.r0 / 4)
        max_len = 4 * h / np.sqrt(d)
        if self.s is not None:
            max_len = min(max_len, 2 * self.s)
        fixed = [1.0, self.r0]
        if self.s is not None:
            fixed += [self.r_c - 3 * self.s, self.r_c, self.r_c + 3 * self.s]
        r, w = radial_rule(sigma, p, delta, self.r_end, max_len, fixed=fixed, n=16)
        if self.s is not None:
            w = w * 0.5 * erfc((r - self.r_c) / self.s)
        self.r = r
        self.w = (2 - sigma) * w
        self.comp = np.where((sigma > 1) | ((sigma == 1) & (r < 1)), 1.0, 0.0)
        self.params = {"delta": delta, "panel": max_len, "r_near": self.r_end,
                       "radial_nodes": int(r.size)}

    # near field nodes --------------------------------------------------
    def near_nodes(self, half=False):
        """Points ``y``, weights (without amplitude) and compensator flags.

        With ``half=True`` only one node of each antipodal pair is returned;
        the partner is ``-y`` with the same weight.
        """
        if self.grid.dim == 1:
            if half:
                return self.r[:, None], self.w, self.comp
            y = np.concatenate([self.r, -self.r])[:, None]
            return y, np.tile(self.w, 2), np.tile(self.comp, 2)
        ys, ws, cs = [], [], []
        for ri, wi, ci in zip(self.r, self.w, self.comp):
            nt = int(4 * np.ceil((1.15 * self.xi_max * ri + 24) / 4))
            m = nt // 2 if half else nt
            t = 2 * np.pi * np.arange(m) / nt
            ys.append(ri * np.stack([np.cos(t), np.sin(t)], axis=-1))
            ws.append(np.full(m, wi * 2 * np.pi / nt))
            cs.append(np.full(m, ci))
        self.params["angular_nodes"] = int(sum(len(c) for c in cs)) * (2 if half else 1)
        return np.concatenate(ys), np.concatenate(ws), np.concatenate(cs)

    # far field data ----------------------------------------------------
    def _radial_moment(self, power, upper_comp):
        # int_0^inf chi (1 - psi) r**power dr for the compensator range
        s, rc = self.s, self.r_c
        f = lambda r: 0.5 * erfc((rc - r) / s) * r**power
        lo, hi = max(rc - 9 * s, 1e-300), rc + 9 * s
        if upper_comp == "unit":
            if hi <= 1:
                return 0.0
            val, _ = integrate.quad(f, lo, min(hi, 1.0), epsabs=1e-16, epsrel=1e-13, limit=200)
            if hi < 1:
                val += (1.0 ** (power + 1) - hi ** (power + 1)) / (power + 1)
            return val
        val, _ = integrate.quad(f, lo, hi, epsabs=1e-16, epsrel=1e-13, limit=200)
        return val - hi ** (power + 1) / (power + 1)

    def far_fine_size(self):
        n, P = self.grid.n, self.grid.period
        need = n / 2 + 10.5 * P / (2 * np.pi * self.s) + 1
        return int(max(n, 2 ** int(np.ceil(np.log2(need)))))

    def far_multipliers_1d(self):
        """Far-field transforms for the positive and negative half-lines."""
        sigma = self.k.sigma
        P, n = self.grid.period, self.grid.n
        M = self.far_fine_size()
        z = np.arange(M) * (P / M)
        s, rc = self.s, self.r_c
        J0 = int(np.ceil((rc + 8 * s) / P)) + 1
        W = np.zeros(M)
        for j in range(J0):
            r = z + j * P
            with np.errstate(divide="ignore"):
                val = 0.5 * erfc((rc - r) / s) * r ** (-1 - sigma)
            W += np.where(r > rc - 9 * s, val, 0.0)
        W += P ** (-1 - sigma) * zeta(1 + sigma, J0 + z / P)
        W *= 2 - sigma
        # int_0^P W(z) exp(+i xi z) dz on the lattice, FFT order
        Wp = P * np.fft.ifft(W)
        k = np.fft.fftfreq(n, 1.0 / n).astype(int)
        plus = Wp[k % M]
        minus = np.conj(plus)
        m0 = (2 - sigma) * self._radial_moment(-1 - sigma, "full")
        if sigma > 1:
            m1 = (2 - sigma) * self._radial_moment(-sigma, "full")
        elif sigma == 1:
            m1 = (2 - sigma) * self._radial_moment(-sigma, "unit")
        else:
            m1 = 0.0
        return plus, minus, m0, m1

    def far_multiplier_2d(self):
        """Far-field multiplier for an x-independent 2D kernel."""
        k = self.k
        sigma = k.sigma
        P, n = self.grid.period, self.grid.n
        M = self.far_fine_size()
        s, rc = self.s, self.r_c
        s2 = max(1.7 * P, 4 * s)
        R2 = 4 * s2
        reach = R2 + 7 * s2
        J = int(np.ceil(reach / P)) + 1
        ax = np.arange(M) * (P / M)
        zx, zy = np.meshgrid(ax, ax, indexing="ij")
        W = np.zeros((M, M))
        x0 = np.zeros(2)
        for jx in range(-J, J + 1):
            for jy in range(-J, J + 1):
                yx = zx + jx * P
                yy = zy + jy * P
                r = np.hypot(yx, yy)
                live = (r > rc - 9 * s) & (r < reach)
                if not np.any(live):
                    continue
                rl = r[live]
                yv = np.stack([yx[live], yy[live]], axis=-1)
                a = k.amp(x0, yv * (2 * self.r0 / rl)[:, None])
                W[live] += (0.5 * erfc((rc - rl) / s) * 0.5 * erfc((rl - R2) / s2)
                            * a * rl ** (-2 - sigma))
        W *= 2 - sigma
        Wp = P * P * np.fft.ifft2(W)
        kk = np.fft.fftfreq(n, 1.0 / n).astype(int)
        far = Wp[np.ix_(kk % M, kk % M)]
        nt = 1024
        t = 2 * np.pi * np.arange(nt) / nt
        th = np.stack([np.cos(t), np.sin(t)], axis=-1)
        a = k.amp(x0, 2 * self.r0 * th)
        A0 = a.sum() * 2 * np.pi / nt
        A1 = (th * a[:, None]).sum(axis=0) * 2 * np.pi / nt
        m0 = (2 - sigma) * A0 * self._radial_moment(-1 - sigma, "full")
        if sigma > 1:
            m1 = (2 - sigma) * A1 * self._radial_moment(-sigma, "full")
        elif sigma == 1:
            m1 = (2 - sigma) * A1 * self._radial_moment(-sigma, "unit")
        else:
            m1 = np.zeros(2)
        xi = self.grid.xi()
        mult = far - m0 - 1j * (xi[0] * m1[0] + xi[1] * m1[1])
        mult[0, 0] = 0.0
        self.params["far_fine"] = M
        self.params["far_lattice"] = J
        return mult


@lru_cache(maxsize=32)
def _layout(k: KernelSpec, grid: GridSpec) -> QuadratureLayout:
    return QuadratureLayout(k, grid)


def _quadrature_multiplier(lay: QuadratureLayout) -> np.ndarray:
    """Combined near and far multiplier for an x-independent kernel."""
    k, grid = lay.k, lay.grid
    xi = np.stack(grid.xi(), axis=-1).reshape(-1, grid.dim)
    y, w, c = lay.near_nodes(half=True)
    x0 = np.zeros(grid.dim)
    wp = w * k.amp(x0, y)
    wm = w * k.amp(x0, -y)
    out = np.zeros(xi.shape[0], dtype=complex)
    chunk = max(1, 2**21 // max(xi.shape[0], 1))
    for i in range(0, y.shape[0], chunk):
        ph = phi(xi @ y[i:i + chunk].T, c[None, i:i + chunk])
        # phi(-t) = conj(phi(t)) pairs each node with its antipode
        out += ph @ wp[i:i + chunk] + np.conj(ph) @ wm[i:i + chunk]
    near = out.reshape(grid.shape)
    if k.truncated:
        return near
    if grid.dim == 1:
        plus, minus, m0, m1 = lay.far_multipliers_1d()
        ap, am = k.amp(x0, np.array([[2 * lay.r0], [-2 * lay.r0]]))
        xi1 = grid.xi()[0]
        far = ap * plus + am * minus - (ap + am) * m0 - 1j * xi1 * (ap - am) * m1
        far[0] = 0.0
        return near + far
    return near + lay.far_multiplier_2d()


def _apply_xdep_1d(lay: QuadratureLayout, values: np.ndarray) -> np.ndarray:
    """Per-point quadrature for x-dependent 1D kernels; ``values`` is (B, n)."""
    k, grid = lay.k, lay.grid
    x = grid.axis()[:, None]
    xi = grid.xi()[0]
    uh = np.fft.fft(values, axis=-1)
    y, w, c = lay.near_nodes()
    acc = np.zeros_like(values)
    chunk = 64
    for i in range(0, y.shape[0], chunk):
        yc = y[i:i + chunk]
        ph = phi(np.outer(yc[:, 0], xi), c[i:i + chunk, None])
        F = np.real(np.fft.ifft(uh[:, None, :] * ph[None], axis=-1))
        amp = k.amp(x[None, :, :], yc[:, None, :])
        acc += np.einsum("bjn,jn->bn", F, w[i:i + chunk, None] * amp)
    if k.truncated:
        return acc
    plus, minus, m0, m1 = lay.far_multipliers_1d()
    ap = k.amp(x, np.array([2 * lay.r0]))
    am = k.amp(x, np.array([-2 * lay.r0]))
    uh0 = uh.copy()
    uh0[:, 0] = 0.0
    cp = np.real(np.fft.ifft(uh0 * plus, axis=-1))
    cm = np.real(np.fft.ifft(uh0 * minus, axis=-1))
    ut = np.real(np.fft.ifft(uh0, axis=-1))
    du = np.real(np.fft.ifft(uh * 1j * xi * ~grid.nyquist_mask(), axis=-1))
    return acc + ap * cp + am * cm - (ap + am) * m0 * ut - (ap - am) * m1 * du


_validated: dict = {}


def _validated_kernel(k: KernelSpec) -> KernelSpec:
    if id(k) not in _validated:
        k.validate()
        _validated[id(k)] = k
    return k


def _integrate(k: KernelSpec, grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """Apply the quadrature route to a stack of fields (B, *grid.shape)."""
    lay = _layout(k, grid)
    if k.x_dependent:
        return _apply_xdep_1d(lay, values)
    mult = _multiplier_cache(k, grid)
    axes = tuple(range(1, values.ndim))
    return np.real(np.fft.ifftn(np.fft.fftn(values, axes=axes) * mult, axes=axes))


@lru_cache(maxsize=32)
def _multiplier_cache(k: KernelSpec, grid: GridSpec) -> np.ndarray:
    mult = _quadrature_multiplier(_layout(k, grid))
    if not np.all(np.isfinite(mult)):
        raise AccuracyError("quadrature produced non-finite weights")
    return mult


def apply_quadrature(k: KernelSpec, u, x_subset=None, validate: bool = True):
    """Evaluate ``L u`` by direct quadrature of the defining integral.

    Parameters
    ----------
    k : KernelSpec
        Any admissible kernel; x-dependent kernels are supported in 1D.
    u : Field or sequence of Field
        Fields on a common grid.  A sequence is processed as one batch.
    x_subset : array_like of int, optional
        Grid indices (shape ``(m,)`` in 1D or ``(m, 2)`` in 2D).  When given,
        the values at those points are returned as an array.
    validate : bool
        Check the kernel first (cached per kernel object).

    Returns
    -------
    Field, list of Field or ndarray
    """
    if validate:
        _validated_kernel(k)
    single = isinstance(u, Field)
    fields = [u] if single else list(u)
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError("all fields must share a grid")
    values = np.stack([f.values for f in fields])
    out = _integrate(k, grid, values)
    if x_subset is not None:
        idx = np.asarray(x_subset, dtype=int)
        if grid.dim == 1:
            sel = out[:, idx.reshape(-1) % grid.n]
        else:
            idx = idx.reshape(-1, 2) % grid.n
            sel = out[:, idx[:, 0], idx[:, 1]]
        return sel[0] if single else sel
    res = [Field(grid, v) for v in out]
    return res[0] if single else res


def quadrature_params(k: KernelSpec, grid: GridSpec) -> dict:
    """Quadrature parameters used by :func:`apply_quadrature` on ``grid``."""
    lay = _layout(k, grid)
    return dict(lay.params, r0=lay.r0, cutoff_width=lay.s)


def apply_quadrature_function(k: KernelSpec, func, grad, points, radius=1e6,
                              feature=0.0, width=1.0):
    """``L u`` at arbitrary points for a function on the whole line.

    Parameters
    ----------
    k : KernelSpec
        x-independent 1D kernel.
    func, grad : callable
        ``u`` and ``u'``, vectorized.
    points : array_like
        Evaluation points.
    radius : float
        Truncation radius; the neglected part of ``u(x+y) K`` beyond it is
        assumed small and the ``-u(x)`` and gradient tails are added exactly.
    feature, width : float
        Location and scale of the main feature of ``u``; panels are refined
        around it.

    Returns
    -------
    ndarray
    """
    _validated_kernel(k)
    if k.dim != 1 or k.x_dependent:
        raise DomainError("whole-line evaluation supports x-independent 1D kernels")
    sigma = k.sigma
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    x0 = np.zeros(1)
    p = 1 if sigma < 1 else 2
    delta = 0.05 * width
    out = np.empty(pts.size)
    for i, x in enumerate(pts):
        reach = abs(x - feature) + 10 * width
        near = np.arange(delta, reach + width / 8, width / 8)
        far = reach * 1.25 ** np.arange(1, int(np.log(radius / reach) / np.log(1.25)) + 2)
        far = far[far < radius]
        fixed = [1.0] if sigma == 1 else []
        br = np.union1d(np.concatenate([[delta], near, far, [radius]]), fixed)
        br = br[(br >= delta) & (br <= radius)]
        r1, w1 = panel_rule(br, 16)
        w1 = w1 * r1 ** (-1 - sigma)
        r0, w0 = gauss_jacobi(delta, p - 1 - sigma, 20)
        w0 = w0 / r0**p
        r = np.concatenate([r0, r1])
        w = np.concatenate([w0, w1]) * (2 - sigma)
        comp = np.where((sigma > 1) | ((sigma == 1) & (r < 1)), 1.0, 0.0)
        ux, gx = func(x), grad(x)
        total = 0.0
        for sgn in (1.0, -1.0):
            a = k.amp(x0, np.array([[sgn * radius * 2]]))[0]
            av = k.amp(x0, (sgn * r)[:, None])
            F = func(x + sgn * r) - ux - sgn * r * gx * comp
            # small r: use the Taylor-free difference only where it is stable
            total += np.sum(w * av * F)
            total += -ux * (2 - sigma) * a * radius**-sigma / sigma
            if sigma > 1:
                total += -sgn * gx * (2 - sigma) * a * radius ** (1 - sigma) / (sigma - 1)
        out[i] = total
    return out


def cutoff(grid: GridSpec, center=None, radius=None, width=None) -> Field:
    """Clamped-cosine bump: one on ``|x - c| <= radius``, zero beyond ``radius + width``.

    Distances are measured on the torus.  Defaults: centre at the middle of
    the cell, ``width = period/8`` and ``radius = period/8``.
    """
    P = grid.period
    width = P / 8 if width is None else float(width)
    radius = P / 8 if radius is None else float(radius)
    c = np.full(grid.dim, P / 2) if center is None else np.broadcast_to(center, (grid.dim,))
    d2 = 0.0
    for xa, ca in zip(grid.coords(), c):
        dx = np.abs(xa - ca) % P
        d2 = d2 + np.minimum(dx, P - dx) ** 2
    t = np.clip((np.sqrt(d2) - radius) / width, 0.0, 1.0)
    return Field(grid, 0.5 * (1 + np.cos(np.pi * t)))


def commutator(k: KernelSpec, eta: Field, u: Field, route: str = "quadrature") -> Field:
    """``L(eta u) - eta L u``.

    ``route='quadrature'`` applies :func:`apply_quadrature` to both terms;
    ``route='spectral'`` uses the symbol table of ``k`` instead.
    """
    if eta.grid != u.grid:
        raise GridMismatchError("eta and u must share a grid")
    if route == "quadrature":
        a, b = apply_quadrature(k, [eta * u, u])
    elif route == "spectral":
        from .symbol import symbol_table

        t = symbol_table(k, u.grid)
        a, b = apply_spectral(t, eta * u), apply_spectral(t, u)
    else:
        raise DomainError(f"unknown route {route!r}")
    return a - eta * b
