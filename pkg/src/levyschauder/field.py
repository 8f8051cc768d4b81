"""Periodic grids, sampled fields and their Fourier spectra.

Every function lives on the torus ``[0, period)^dim`` sampled at ``n`` points
per axis.  Spectra use the unitary-mean convention ``coeffs = fftn(values)/N``
so that ``coeffs[0]`` is the grid mean and a constant field has a single unit
coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError, GridMismatchError

__all__ = [
    "GridSpec",
    "Field",
    "Spectrum",
    "transform",
    "inverse",
    "apply_multiplier",
    "shift",
    "second_difference",
    "gradient",
    "random_field",
    "lacunary_field",
    "from_function",
    "save_csv",
    "load_csv",
]

_N_LIMITS = {1: (64, 4096), 2: (64, 256)}

# phase tables shared by every grid size so refinement sees the same function
_PHASE_TABLE = {1: (4096,), 2: (256, 256)}


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid.

    Parameters
    ----------
    dim : {1, 2}
        Spatial dimension.
    n : int
        Points per axis, a power of two.
    period : float, optional
        Side length of the torus, ``2*pi`` by default.
    """

    dim: int
    n: int
    period: float = 2 * np.pi

    def __post_init__(self):
        if self.dim not in _N_LIMITS:
            raise DomainError(f"dim must be 1 or 2, got {self.dim}")
        n = int(self.n)
        if n != self.n or n <= 0 or n & (n - 1):
            raise DomainError(f"n must be a power of two, got {self.n}")
        lo, hi = _N_LIMITS[self.dim]
        if not lo <= n <= hi:
            raise DomainError(f"n={n} outside [{lo}, {hi}] for dim={self.dim}")
        if not (np.isfinite(self.period) and self.period > 0):
            raise DomainError(f"period must be positive, got {self.period}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "period", float(self.period))

    @property
    def spacing(self) -> float:
        return self.period / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    def axis(self) -> np.ndarray:
        """Coordinates of the grid along one axis."""
        return np.arange(self.n) * self.spacing

    def coords(self) -> tuple:
        """Coordinate arrays, one per axis, each of shape :attr:`shape`."""
        ax = self.axis()
        return tuple(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def wavenumbers(self) -> np.ndarray:
        """Integer lattice frequencies along one axis in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    def xi(self) -> tuple:
        """Physical frequencies ``2*pi*k/period``, one array per axis."""
        ax = 2 * np.pi * self.wavenumbers() / self.period
        return tuple(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def xi_norm(self) -> np.ndarray:
        return np.sqrt(sum(x**2 for x in self.xi()))

    def nyquist_mask(self) -> np.ndarray:
        """True on lattice points with a Nyquist component on some axis."""
        k = self.wavenumbers()
        hit = np.abs(k) == self.n // 2
        masks = np.meshgrid(*([hit] * self.dim), indexing="ij")
        return np.logical_or.reduce(masks)

    def refine(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.dim, self.n * factor, self.period)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a periodic function on ``grid``."""

    grid: GridSpec
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            if v.size == self.grid.size:
                v = v.reshape(self.grid.shape)
            else:
                raise GridMismatchError(
                    f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("field contains non-finite values")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __add__(self, other):
        return self.with_values(self.values + _vals(self.grid, other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(self.grid, other))

    def __mul__(self, other):
        return self.with_values(self.values * _vals(self.grid, other))

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _vals(grid, other):
    if isinstance(other, Field):
        if other.grid != grid:
            raise GridMismatchError(f"{other.grid} differs from {grid}")
        return other.values
    return other


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients of a field on ``grid`` in FFT order."""

    grid: GridSpec
    coeffs: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise GridMismatchError(
                f"coefficients of shape {c.shape} do not fit grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    def coeff(self, *k: int) -> complex:
        """Coefficient at integer lattice frequency ``k``."""
        idx = tuple(int(ki) % self.grid.n for ki in k)
        return complex(self.coeffs[idx])


def transform(f: Field) -> Spectrum:
    """Forward transform with the unitary-mean convention."""
    if not np.all(np.isfinite(f.values)):
        raise DataError("field contains non-finite values")
    return Spectrum(f.grid, np.fft.fftn(f.values) / f.grid.size)


def inverse(s: Spectrum) -> Field:
    """Inverse of :func:`transform`; the imaginary part is discarded."""
    if not np.all(np.isfinite(s.coeffs)):
        raise DataError("spectrum contains non-finite coefficients")
    return Field(s.grid, np.real(np.fft.ifftn(s.coeffs * s.grid.size)))


def apply_multiplier(f: Field, m) -> Field:
    """Return ``inverse(m * transform(f))`` for a multiplier sampled on the lattice.

    Taking the real part treats Nyquist modes as cosines, which is the
    real trigonometric interpolant whenever ``m`` is conjugate symmetric.
    """
    m = np.broadcast_to(np.asarray(m), f.grid.shape)
    return Field(f.grid, np.real(np.fft.ifftn(m * np.fft.fftn(f.values))))


def _phase(grid: GridSpec, h) -> np.ndarray:
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.shape != (grid.dim,):
        if h.size == 1:
            h = np.full(grid.dim, float(h[0]))
        else:
            raise DomainError(f"shift vector must have {grid.dim} components")
    return np.exp(1j * sum(x * hi for x, hi in zip(grid.xi(), h)))


def shift(f: Field, h) -> Field:
    """Evaluate the trigonometric interpolant of ``f`` at ``x + h``.

    ``h`` need not be a multiple of the spacing.  For fields with Nyquist
    content and off-grid ``h`` the Nyquist mode is read as a cosine, so the
    group law ``shift(shift(f, a), b) == shift(f, a + b)`` is exact only for
    fields without Nyquist content.
    """
    return apply_multiplier(f, _phase(f.grid, h))


def second_difference(f: Field, h) -> Field:
    """``f(x+h) + f(x-h) - 2 f(x)`` via a single real multiplier."""
    ph = _phase(f.grid, h)
    return apply_multiplier(f, 2.0 * (ph.real - 1.0))


def gradient(f: Field) -> tuple:
    """Spectral partial derivatives, Nyquist modes zeroed."""
    keep = ~f.grid.nyquist_mask()
    return tuple(apply_multiplier(f, 1j * x * keep) for x in f.grid.xi())


def random_field(grid: GridSpec, alpha: float, seed: int) -> Field:
    """Random periodic field with power-law Fourier amplitudes.

    The coefficient at lattice point ``k != 0`` has modulus
    ``|k|**-(dim/2 + alpha + 0.01)`` and a uniformly distributed phase.
    Phases are read from a seeded table indexed by ``k`` modulo a fixed size,
    so the same seed produces the same function on every admissible grid
    and refinement studies compare like with like.  Nyquist modes and the
    mean are zero.

    Parameters
    ----------
    grid : GridSpec
    alpha : float
        Target regularity, positive.
    seed : int

    Returns
    -------
    Field
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    table_shape = _PHASE_TABLE[grid.dim]
    theta = np.random.default_rng(seed).random(table_shape)
    k = grid.wavenumbers().astype(int)
    ks = np.meshgrid(*([k] * grid.dim), indexing="ij")
    pos = tuple(ki % m for ki, m in zip(ks, table_shape))
    neg = tuple((-ki) % m for ki, m in zip(ks, table_shape))
    phi = 2 * np.pi * (theta[pos] - theta[neg])
    knorm = np.sqrt(sum(ki.astype(float) ** 2 for ki in ks))
    with np.errstate(divide="ignore"):
        amp = knorm ** -(grid.dim / 2 + alpha + 0.01)
    amp[knorm == 0] = 0.0
    amp[grid.nyquist_mask()] = 0.0
    coeffs = amp * np.exp(1j * phi)
    return Field(grid, np.real(np.fft.ifftn(coeffs * grid.size)))


def lacunary_field(grid: GridSpec, J: int | None = None) -> Field:
    """Lacunary series ``sum_{j=1}^{J} 2**-j cos(2**j x_1)``.

    By default ``J`` is the largest integer with ``2**J <= n/4``.  The series
    is bounded in the Zygmund class of order one while its Lipschitz
    constant grows linearly in ``J``.
    """
    if J is None:
        J = int(np.log2(grid.n // 4))
    if J < 1 or 2**J > grid.n // 2 - 1:
        raise DomainError(f"J={J} not resolvable on n={grid.n}")
    x = grid.coords()[0] * (2 * np.pi / grid.period)
    vals = sum(2.0**-j * np.cos(2**j * x) for j in range(1, J + 1))
    return Field(grid, vals)


def from_function(grid: GridSpec, func) -> Field:
    """Sample ``func(*coords)`` on the grid."""
    return Field(grid, np.broadcast_to(func(*grid.coords()), grid.shape))


def save_csv(f: Field, path) -> None:
    """Write ``index per axis, value`` rows at 17 significant digits."""
    idx = np.indices(f.grid.shape).reshape(f.grid.dim, -1).T
    names = ["i", "j"][: f.grid.dim]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# period={f.grid.period!r}\n")
        fh.write(",".join(names + ["value"]) + "\n")
        for row, v in zip(idx, f.values.ravel()):
            fh.write(",".join(str(int(r)) for r in row) + f",{v:.17g}\n")


def load_csv(path, period: float | None = None) -> Field:
    """Read a field written by :func:`save_csv`.

    The period is taken from the header comment when present, otherwise from
    ``period`` or ``2*pi``.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8").splitlines()
    stored = None
    body = []
    for line in text:
        if line.startswith("#"):
            if "period=" in line:
                stored = float(line.split("period=", 1)[1])
            continue
        if line.strip():
            body.append(line)
    if not body:
        raise DataError(f"{path}: no data")
    header = [c.strip() for c in body[0].split(",")]
    dim = len(header) - 1
    if dim not in (1, 2) or header[-1] != "value":
        raise DataError(f"{path}: unexpected header {body[0]!r}")
    try:
        rows = [line.split(",") for line in body[1:]]
        idx = np.array([[int(c) for c in r[:dim]] for r in rows])
        vals = np.array([float(r[dim]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed row ({exc})") from None
    n = int(idx.max()) + 1
    if vals.size != n**dim:
        raise DataError(f"{path}: expected {n**dim} rows, found {vals.size}")
    if period is None:
        period = stored if stored is not None else 2 * np.pi
    grid = GridSpec(dim, n, period)
    out = np.full(grid.shape, np.nan)
    out[tuple(idx.T)] = vals
    return Field(grid, out)
