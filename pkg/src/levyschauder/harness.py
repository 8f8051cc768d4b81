"""Measured-constant experiments with deterministic CSV and JSON reports.

Each experiment expands an :class:`ExperimentConfig` into independent row
jobs.  A row carries its full configuration, the measured quantities and a
``passed`` flag computed from columns of that same row.  Failures inside a
row are caught and recorded with a reason, never skipped.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from functools import lru_cache, partial
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, LevyError
from .field import Field, GridSpec, gradient, lacunary_field, random_field
from .kernel import builtin_kernel, parse_kernel_name
from .normlab import (
    ModulusData,
    campanato_sequence,
    dini_integral,
    dini_transform,
    holder_seminorm,
    lipschitz_constant,
    log_lipschitz_constant,
    modulus_of_continuity,
    zygmund_norm,
    zygmund_seminorm_secdiff,
)
from .operator import (
    apply_quadrature,
    apply_quadrature_function,
    apply_spectral,
    commutator,
    cutoff,
    fractional_laplacian,
    quadrature_params,
)
from .resolvent import green_function, solve_constant, solve_variable
from .symbol import symbol_table

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "default_config",
    "load_config",
    "run_experiment",
    "exp_max_principle",
    "exp_schauder",
    "exp_borderline",
    "exp_isomorphism",
    "exp_green",
    "exp_campanato",
    "exp_commutator",
    "run",
    "report",
]


class ConfigError(DataError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass
class ExperimentConfig:
    """One experiment and its parameter sweep.

    Attributes
    ----------
    experiment : str
        Experiment id, a key of :data:`EXPERIMENTS`.
    kernel : list of str
        Built-in kernel names such as ``'fraclap'`` or ``'xdep(0.1)'``.
    sigmas, alphas, lambdas : list of float
    grid_sizes : list of int
        Base resolutions; refinement rows also use ``2n``.
    seed : int
        Base seed; the corpus uses ``seed, seed + 1, ...``.
    corpus : int
        Random fields per row.
    tolerances : dict
        Overrides for the experiment's pass thresholds.
    data : list of str
        Data families, where the experiment offers a choice.
    period : float
    output : str or None
        Output directory.
    """

    experiment: str
    kernel: list = dc_field(default_factory=lambda: ["fraclap"])
    sigmas: list = dc_field(default_factory=lambda: [0.5, 1.0, 1.5])
    alphas: list = dc_field(default_factory=lambda: [0.5])
    lambdas: list = dc_field(default_factory=lambda: [1.0])
    grid_sizes: list = dc_field(default_factory=lambda: [256])
    seed: int = 42
    corpus: int = 8
    tolerances: dict = dc_field(default_factory=dict)
    data: list = dc_field(default_factory=lambda: ["random"])
    period: float = 2 * math.pi
    output: str | None = None

    def tol(self, key):
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[self.experiment][key]))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}


@dataclass
class ExperimentResult:
    """Rows and metadata of one experiment run."""

    experiment: str
    rows: list
    metadata: dict

    @property
    def passes(self) -> int:
        return sum(1 for r in self.rows if r.get("passed"))

    @property
    def failures(self) -> int:
        return len(self.rows) - self.passes

    @property
    def ok(self) -> bool:
        return self.failures == 0 and bool(self.rows)

    def summary(self) -> dict:
        return {"experiment": self.experiment, "rows": len(self.rows),
                "passes": self.passes, "failures": self.failures}


DEFAULT_TOLERANCES = {
    "max_principle": {"ratio": 1e-8},
    "schauder": {"stability": 0.25, "bound": 1e3, "sigma_step": 2.0},
    "borderline": {"stability": 0.25},
    "isomorphism": {"stability": 0.25, "bound": 1e3, "roundtrip": 1e-9},
    "green": {"mass": 1e-4, "positivity": 1e-8, "closed_form": 1e-4,
              "exponent": 0.15, "stability": 0.25},
    "campanato": {"stability": 0.25},
    "commutator": {"stability": 0.25},
}

_SIGMA_SUBSWEEP = (1.5, 1.9, 1.99)


# configuration --------------------------------------------------------------

def _err(i, name, msg):
    return ConfigError(f"experiments[{i}].{name}: {msg}", field=name)


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _validate(raw: dict, i: int) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"experiments[{i}]: expected an object", field=None)
    known = {f.name for f in dc_fields(ExperimentConfig)}
    for key in raw:
        if key not in known:
            raise _err(i, key, "unknown field")
    if "experiment" not in raw:
        raise _err(i, "experiment", "missing")
    exp = str(raw["experiment"]).removeprefix("exp_")
    if exp not in EXPERIMENTS:
        raise _err(i, "experiment", f"unknown id {exp!r}; choose from {sorted(EXPERIMENTS)}")
    cfg = default_config(exp)
    for key, val in raw.items():
        if key == "experiment":
            continue
        if key in ("kernel", "sigmas", "alphas", "lambdas", "grid_sizes", "data"):
            val = _as_list(val)
            if not val:
                raise _err(i, key, "must be a nonempty list")
        setattr(cfg, key, val)
    _check_values(cfg, i)
    return cfg


def _check_values(cfg: ExperimentConfig, i: int):
    def nums(name, lo, hi, lo_open=True, hi_open=True):
        for v in getattr(cfg, name):
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise _err(i, name, f"{v!r} is not a finite number")
            if (v <= lo if lo_open else v < lo) or (v >= hi if hi_open else v > hi):
                raise _err(i, name, f"{v!r} outside its admissible range")

    nums("sigmas", 0, 2, hi_open=cfg.experiment != "green")
    nums("alphas", 0, math.inf)
    nums("lambdas", 0, math.inf)
    if cfg.experiment in ("schauder", "commutator"):
        for a in cfg.alphas:
            if a >= 1:
                raise _err(i, "alphas", f"{a} must lie in (0, 1) for this experiment")
    for name in cfg.kernel:
        try:
            base, eps = parse_kernel_name(str(name))
        except LevyError as exc:
            raise _err(i, "kernel", str(exc)) from None
        if base == "nonsym1d" and 1.0 in cfg.sigmas:
            raise _err(i, "sigmas", "nonsym1d is not admissible at sigma = 1")
        if base == "xdep" and eps is None:
            raise _err(i, "kernel", "xdep needs its size, for example 'xdep(0.1)'")
        dim = 2 if base == "aniso2d" else 1
        for n in cfg.grid_sizes:
            for m in _sizes_for(cfg, n):
                try:
                    GridSpec(dim, int(m), float(cfg.period))
                except (LevyError, TypeError, ValueError) as exc:
                    raise _err(i, "grid_sizes", str(exc)) from None
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or cfg.seed < 0:
        raise _err(i, "seed", "must be a nonnegative integer")
    if not isinstance(cfg.corpus, int) or cfg.corpus < 1:
        raise _err(i, "corpus", "must be a positive integer")
    if not isinstance(cfg.tolerances, dict):
        raise _err(i, "tolerances", "must be an object")
    for key, v in cfg.tolerances.items():
        if key not in DEFAULT_TOLERANCES[cfg.experiment]:
            raise _err(i, "tolerances", f"unknown tolerance {key!r}")
        if not isinstance(v, (int, float)) or not v > 0:
            raise _err(i, "tolerances", f"{key} must be positive")
    allowed = _DATA_FAMILIES[cfg.experiment]
    for d in cfg.data:
        if d not in allowed:
            raise _err(i, "data", f"{d!r} not one of {allowed}")
    if cfg.experiment == "commutator" and cfg.period < 16:
        raise _err(i, "period", "the cutoff geometry needs period >= 16")


def _sizes_for(cfg, n):
    if cfg.experiment in ("schauder", "isomorphism", "campanato", "commutator"):
        return (n, 2 * n)
    return (n,)


_DATA_FAMILIES = {
    "max_principle": ("random", "constant"),
    "schauder": ("random", "mode"),
    "borderline": ("lacunary", "mode"),
    "isomorphism": ("random",),
    "green": ("mass", "decay"),
    "campanato": ("dini", "nondini", "holder", "constant"),
    "commutator": ("random", "constant"),
}


def default_config(experiment: str) -> ExperimentConfig:
    """Desk-scale defaults for ``experiment``."""
    exp = experiment.removeprefix("exp_")
    base = ExperimentConfig(exp)
    if exp == "max_principle":
        base.kernel = ["fraclap", "nonsym1d", "truncated"]
        base.sigmas = [0.5, 1.5]
        base.lambdas = [0.1, 1.0, 10.0]
        base.grid_sizes = [512]
    elif exp == "schauder":
        base.sigmas = [0.5, 1.0, 1.5, 1.9, 1.99]
        base.alphas = [0.3, 0.5, 0.7]
        base.lambdas = [0.1, 1.0, 10.0]
        base.grid_sizes = [1024]
        base.corpus = 2
    elif exp == "borderline":
        base.sigmas = [0.5, 1.5]
        base.alphas = [1.0]
        base.grid_sizes = [512, 1024, 2048]
        base.data = ["lacunary"]
    elif exp == "isomorphism":
        base.alphas = [0.5, 1.0, 1.5]
        base.sigmas = [0.5, 1.5]
        base.grid_sizes = [512]
        base.corpus = 2
    elif exp == "green":
        base.sigmas = [0.5, 1.0, 1.5, 2.0]
        base.lambdas = [0.5, 1.0, 2.0]
        base.data = ["mass", "decay"]
    elif exp == "campanato":
        base.sigmas = [0.5, 1.5]
        base.grid_sizes = [512]
        base.data = ["dini", "holder", "constant", "nondini"]
        base.corpus = 1
    elif exp == "commutator":
        base.sigmas = [0.5, 1.0, 1.5]
        base.period = 16.0
        base.grid_sizes = [512]
        base.corpus = 4
    return base


def load_config(path) -> list:
    """Parse and validate a JSON config into a list of :class:`ExperimentConfig`.

    The file holds ``{"experiments": [...]}`` or a single experiment object.

    Raises
    ------
    ConfigError
        With the line and column for syntax errors, or the field name.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if isinstance(raw, dict) and "experiments" in raw:
        extra = set(raw) - {"experiments"}
        if extra:
            raise ConfigError(f"unknown top-level field {sorted(extra)[0]!r}",
                              field=sorted(extra)[0])
        items = raw["experiments"]
    elif isinstance(raw, dict):
        items = [raw]
    else:
        items = raw
    if not isinstance(items, list) or not items:
        raise ConfigError("experiments: the experiment list is empty", field="experiments")
    return [_validate(item, i) for i, item in enumerate(items)]


# shared helpers -------------------------------------------------------------

@lru_cache(maxsize=64)
def _kernel(name, sigma, dim=None):
    base, eps = parse_kernel_name(name)
    return builtin_kernel(base, sigma, dim=dim, eps=eps)


def _dim(name):
    return 2 if parse_kernel_name(name)[0] == "aniso2d" else 1


@lru_cache(maxsize=64)
def _table(name, sigma, dim, n, period):
    return symbol_table(_kernel(name, sigma, dim), GridSpec(dim, n, period))


def _grid(name, n, period):
    return GridSpec(_dim(name), n, period)


def _solve(name, sigma, lam, f: Field, tol=1e-11):
    k = _kernel(name, sigma, f.grid.dim)
    if k.x_dependent:
        return solve_variable(k, lam, f, tol=tol)[0]
    g = f.grid
    return solve_constant(_table(name, sigma, g.dim, g.n, g.period), lam, f)


def _apply(name, sigma, u: Field):
    k = _kernel(name, sigma, u.grid.dim)
    if k.x_dependent:
        return apply_quadrature(k, u)
    g = u.grid
    return apply_spectral(_table(name, sigma, g.dim, g.n, g.period), u)


def _stable(a, b, tol):
    if a == 0 and b == 0:
        return True, 1.0
    if not (np.isfinite(a) and np.isfinite(b)) or a == 0:
        return False, math.inf
    r = b / a
    return abs(r - 1) <= tol, r


def _row_guard(func):
    """Turn exceptions into a failed row that still carries its configuration."""

    def wrapped(params):
        try:
            row = func(**params)
        except Exception as exc:  # noqa: BLE001 - every failure becomes a row
            row = dict(params)
            row["passed"] = False
            row["reason"] = f"{type(exc).__name__}: {exc}"
            return row
        row.setdefault("reason", "" if row["passed"] else "criterion not met")
        return row

    wrapped.__name__ = func.__name__
    return wrapped


def _run_rows(func, params, jobs):
    guarded = _ROW_FUNCS[func]
    if jobs > 1 and len(params) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(partial(_call, func), params))
    return [guarded(p) for p in params]


def _seeds(cfg):
    return [cfg.seed + i for i in range(cfg.corpus)]


def _stats(prefix, values):
    v = np.asarray(values, dtype=float)
    return {f"{prefix}_max": float(np.max(v)), f"{prefix}_median": float(np.median(v))}


def _metadata(cfg):
    quad = {}
    for name in cfg.kernel:
        for s in cfg.sigmas:
            if s >= 2:
                continue
            try:
                quad[f"{name}@{s}"] = quadrature_params(
                    _kernel(name, s), _grid(name, cfg.grid_sizes[0], cfg.period))
            except LevyError as exc:
                quad[f"{name}@{s}"] = {"error": str(exc)}
    return {"version": __version__, "seed": cfg.seed, "config": cfg.to_dict(),
            "quadrature": quad}


# row functions --------------------------------------------------------------

def _row_max_principle(kernel, sigma, lam, n, period, data, seeds, alpha, tol):
    g = _grid(kernel, n, period)
    ratios = []
    for s in seeds:
        if data == "constant":
            f = Field(g, np.full(g.shape, 1.0 + 0.1 * s))
        else:
            f = random_field(g, alpha, s)
        u = _solve(kernel, sigma, lam, f)
        ratios.append(lam * u.sup_norm() / f.sup_norm())
    row = dict(kernel=kernel, sigma=sigma, lam=lam, n=n, period=period, data=data,
               alpha=alpha, corpus=len(seeds), seed0=seeds[0], tol=tol)
    row.update(_stats("ratio", ratios))
    row["passed"] = row["ratio_max"] <= 1 + tol
    return row


def _schauder_R(kernel, sigma, lam, alpha, n, period, data, seed):
    g = _grid(kernel, n, period)
    if data == "mode":
        f = Field(g, np.cos(3 * g.coords()[0] * 2 * np.pi / period))
    else:
        f = random_field(g, alpha, seed)
    u = _solve(kernel, sigma, lam, f)
    w = fractional_laplacian(sigma, u)
    return (holder_seminorm(w, alpha) + lam * holder_seminorm(u, alpha)) / holder_seminorm(f, alpha)


def _row_schauder(kernel, sigma, lam, alpha, n, period, data, seeds, stability, bound):
    R1 = [_schauder_R(kernel, sigma, lam, alpha, n, period, data, s) for s in seeds]
    R2 = [_schauder_R(kernel, sigma, lam, alpha, 2 * n, period, data, s) for s in seeds]
    ok, ratio = _stable(max(R1), max(R2), stability)
    row = dict(kernel=kernel, sigma=sigma, lam=lam, alpha=alpha, n=n, period=period,
               data=data, corpus=len(seeds), seed0=seeds[0])
    row.update(_stats("R_n", R1))
    row.update(_stats("R_2n", R2))
    row.update(refinement_ratio=ratio, stability_tol=stability, bound=bound)
    row["passed"] = bool(ok and max(R1 + R2) <= bound)
    return row


def _lambda_one_norm(f: Field) -> float:
    return f.sup_norm() + zygmund_seminorm_secdiff(f, 1.0)


def _row_borderline(kernel, sigma, lam, sizes, period, data, stability):
    ll, lip = [], []
    for n in sizes:
        g = _grid(kernel, n, period)
        if data == "mode":
            f = Field(g, np.cos(g.coords()[0] * 2 * np.pi / period))
        else:
            f = lacunary_field(g)
        u = _solve(kernel, sigma, lam, f)
        w = fractional_laplacian(sigma, u)
        ll.append(log_lipschitz_constant(w) / _lambda_one_norm(f))
        lip.append(lipschitz_constant(w))
    row = dict(kernel=kernel, sigma=sigma, lam=lam, sizes=list(sizes), period=period,
               data=data, stability_tol=stability)
    stable = True
    worst = 1.0
    for i, n in enumerate(sizes):
        row[f"loglip_ratio_n{n}"] = ll[i]
        row[f"lipschitz_n{n}"] = lip[i]
        if i:
            ok, r = _stable(ll[i - 1], ll[i], stability)
            stable &= ok
            worst = r if abs(r - 1) > abs(worst - 1) else worst
    increasing = all(b > a for a, b in zip(lip, lip[1:]))
    row.update(refinement_ratio_worst=worst, loglip_stable=stable,
               lipschitz_increasing=increasing)
    # the growth check only applies to lacunary data, whose J grows with n
    row["passed"] = bool(stable and (increasing or data == "mode"))
    return row


def _iso_measure(kernel, sigma, lam, alpha, n, period, seed):
    g = _grid(kernel, n, period)
    u = random_field(g, alpha + sigma, seed)
    f = _apply(kernel, sigma, u) - lam * u
    us = _solve(kernel, sigma, lam, f, tol=1e-12)
    nu = zygmund_norm(u, alpha + sigma)
    nf = zygmund_norm(f, alpha)
    return nf / nu, zygmund_norm(us, alpha + sigma) / nf, (us - u).sup_norm() / u.sup_norm()


def _row_isomorphism(kernel, sigma, lam, alpha, n, period, seeds, stability, bound, roundtrip):
    m1 = [_iso_measure(kernel, sigma, lam, alpha, n, period, s) for s in seeds]
    m2 = [_iso_measure(kernel, sigma, lam, alpha, 2 * n, period, s) for s in seeds]
    fw1, bw1, rt1 = (max(c) for c in zip(*m1))
    fw2, bw2, rt2 = (max(c) for c in zip(*m2))
    okf, rf = _stable(fw1, fw2, stability)
    okb, rb = _stable(bw1, bw2, stability)
    rt = max(rt1, rt2)
    const = not _kernel(kernel, sigma, _dim(kernel)).x_dependent
    row = dict(kernel=kernel, sigma=sigma, lam=lam, alpha=alpha, n=n, period=period,
               corpus=len(seeds), seed0=seeds[0], forward_n=fw1, forward_2n=fw2,
               backward_n=bw1, backward_2n=bw2, forward_refinement=rf,
               backward_refinement=rb, roundtrip_error=rt, roundtrip_tol=roundtrip,
               stability_tol=stability, bound=bound)
    bounded = max(fw1, fw2, bw1, bw2) <= bound
    row["passed"] = bool(okf and okb and bounded and (rt <= roundtrip or not const))
    return row


def _row_green_mass(beta, lam, mass_tol, pos_tol, cf_tol):
    gf = green_function(beta, lam)
    row = dict(row_type="mass", beta=beta, lam=lam, mass=gf.mass,
               mass_error=gf.mass_error, mass_trapezoid=gf.mass_trapezoid,
               minimum=gf.minimum, maximum=gf.maximum, mass_tol=mass_tol,
               positivity_tol=pos_tol)
    ok = gf.mass_error <= mass_tol and gf.minimum >= -pos_tol * gf.maximum
    if beta == 2:
        r = math.sqrt(lam)
        exact = np.exp(-r * np.abs(gf.x)) / (2 * r)
        dev = float(np.max(np.abs(gf.values - exact)) / np.max(exact))
        row.update(closed_form_deviation=dev, closed_form_tol=cf_tol)
        ok = ok and dev <= cf_tol
    row["passed"] = bool(ok)
    return row


def poisson_profile(x):
    """``P(x, 1) = (1 + x**2)**-1 / pi`` in one dimension, with its derivative."""
    x = np.asarray(x, dtype=float)
    return 1 / (np.pi * (1 + x * x)), -2 * x / (np.pi * (1 + x * x) ** 2)


def _row_green_decay(kernel, sigma, exp_tol, stability, spacing=1 / 32):
    k = _kernel(kernel, sigma, 1)
    p = lambda x: poisson_profile(x)[0]
    dp = lambda x: poisson_profile(x)[1]
    xs = np.linspace(5.0, 20.0, 61)
    vals = np.abs(apply_quadrature_function(k, p, dp, np.concatenate([xs, -xs])))
    y = np.log(0.5 * (vals[:xs.size] + vals[xs.size:]))
    slope = float(np.polyfit(np.log(xs), y, 1)[0])
    l1 = []
    for h in (spacing, spacing / 2):
        x = np.arange(-40.0, 40.0 + h / 2, h)
        v = np.abs(apply_quadrature_function(k, p, dp, x))
        l1.append(float(h * (v.sum() - 0.5 * (v[0] + v[-1]))))
    ok_l1, r = _stable(l1[0], l1[1], stability)
    row = dict(row_type="decay", kernel=kernel, sigma=sigma, exponent=slope,
               expected_exponent=-(1 + sigma), exponent_tol=exp_tol,
               l1_coarse=l1[0], l1_fine=l1[1], l1_refinement=r)
    row["passed"] = bool(abs(slope + 1 + sigma) <= exp_tol and np.isfinite(l1[1]) and ok_l1)
    return row


def _model_modulus(kind, alpha):
    if kind == "dini":
        return lambda s: 1 / np.log(1 / s) ** 2
    if kind == "nondini":
        return lambda s: 1 / np.log(1 / s)
    if kind == "holder":
        return lambda s: s**alpha
    return lambda s: np.zeros_like(s)


def _campanato_data(g, kind, alpha, seed):
    if kind == "holder":
        return random_field(g, alpha, seed)
    if kind == "constant":
        return Field(g, np.full(g.shape, 2.0))
    om = _model_modulus(kind, alpha)
    J = int(np.log2(g.n // 4))
    phase = np.random.default_rng(seed).random(J) * 2 * np.pi
    x = g.coords()[0] * 2 * np.pi / g.period
    vals = sum((om(2.0**-j) - om(2.0 ** (-j - 1))) * np.cos(2**j * x + phase[j - 1])
               for j in range(1, J + 1))
    return Field(g, vals)


def _campanato_measure(kernel, sigma, lam, alpha, n, period, data, seed):
    g = _grid(kernel, n, period)
    f = _campanato_data(g, data, alpha, seed)
    u = _solve(kernel, sigma, lam, f)
    w = fractional_laplacian(sigma, u)
    M = campanato_sequence(w)
    ls = sorted(M)
    radii = 2.0 ** np.array(ls, dtype=float)
    om_f = modulus_of_continuity(f, radii)
    T = dini_transform(om_f, 2.0**-sigma, 2.0).omega
    Ms = np.array([M[l] for l in ls])
    C = float(np.max(np.where(T > 0, Ms / np.where(T > 0, T, 1), 0.0)))
    if np.any((T == 0) & (Ms > 1e-12)):
        C = math.inf
    out_mod = modulus_of_continuity(w)
    if np.all(out_mod.omega == 0):
        flag_out = True
    else:
        flag_out = dini_integral(out_mod)[1]
    return C, flag_out, float(Ms.max())


def _row_campanato(kernel, sigma, lam, alpha, n, period, data, seeds, stability):
    if data == "constant":
        flag_in = True
    else:
        radii = np.geomspace(1e-12, 0.25, 80)
        flag_in = dini_integral(ModulusData.from_model(_model_modulus(data, alpha), radii))[1]
    m1 = [_campanato_measure(kernel, sigma, lam, alpha, n, period, data, s) for s in seeds]
    m2 = [_campanato_measure(kernel, sigma, lam, alpha, 2 * n, period, data, s) for s in seeds]
    C1, C2 = max(m[0] for m in m1), max(m[0] for m in m2)
    flag_out = all(m[1] for m in m1 + m2)
    ok, r = _stable(C1, C2, stability)
    row = dict(kernel=kernel, sigma=sigma, lam=lam, alpha=alpha, n=n, period=period,
               data=data, corpus=len(seeds), seed0=seeds[0], dini_in=flag_in,
               dini_out=flag_out, C_n=C1, C_2n=C2, refinement_ratio=r,
               M_max=max(m[2] for m in m1 + m2), stability_tol=stability)
    # the non-Dini family is exploratory: its output flag is reported only
    row["passed"] = bool(ok and (flag_out or not flag_in))
    return row


def _c_norm(u: Field, alpha, order):
    """``||u||_inf + [u]_alpha`` (order 0) or with the gradient added (order 1)."""
    if order == 0:
        return u.sup_norm() + holder_seminorm(u, alpha)
    grads = gradient(u)
    return (u.sup_norm() + max(gg.sup_norm() for gg in grads)
            + max(holder_seminorm(gg, alpha) for gg in grads))


def _commutator_measure(kernel, sigma, alpha, n, period, data, seed):
    g = _grid(kernel, n, period)
    k = _kernel(kernel, sigma, g.dim)
    order = 0 if sigma < 1 else 1
    if data == "constant":
        u = Field(g, np.full(g.shape, 1.0))
    else:
        u = random_field(g, alpha + order, seed)
    eta = cutoff(g, radius=1.0, width=2.0)
    h = commutator(k, eta, u)
    hs = holder_seminorm(h, alpha)
    return hs, _c_norm(u, alpha, order), u.sup_norm(), _c_norm(u, alpha, 1)


def _row_commutator(kernel, sigma, alpha, n, period, data, seeds, stability):
    out = {}
    for m in (n, 2 * n):
        meas = [_commutator_measure(kernel, sigma, alpha, m, period, data, s) for s in seeds]
        out[m] = meas
    ratio = {m: max(x[0] / x[1] for x in meas) for m, meas in out.items()}
    ok, r = _stable(ratio[n], ratio[2 * n], stability)
    row = dict(kernel=kernel, sigma=sigma, alpha=alpha, n=n, period=period, data=data,
               corpus=len(seeds), seed0=seeds[0], ratio_n=ratio[n],
               ratio_2n=ratio[2 * n], refinement_ratio=r, stability_tol=stability)
    if sigma == 1:
        # smallest N(eps) with [h] <= eps ||u||_{C^{1+a}} + N(eps) ||u||_inf on the corpus
        for eps in (0.5, 0.25):
            need = [max(x[0] - eps * x[3], 0.0) / x[2] for x in out[2 * n]]
            row[f"N_eps_{eps}"] = max(need)
    row["passed"] = bool(ok)
    return row


_ROW_FUNCS = {f.__name__: _row_guard(f) for f in (
    _row_max_principle, _row_schauder, _row_borderline, _row_isomorphism,
    _row_green_mass, _row_green_decay, _row_campanato, _row_commutator)}


def _call(name, params):
    return _ROW_FUNCS[name](params)


# experiments ----------------------------------------------------------------

def exp_max_principle(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Ratio ``lam ||u||_inf / ||f||_inf`` per row; passes when at most ``1 + tol``."""
    params = [dict(kernel=k, sigma=s, lam=lam, n=n, period=cfg.period, data=d,
                   seeds=_seeds(cfg), alpha=cfg.alphas[0], tol=cfg.tol("ratio"))
              for k in cfg.kernel for s in cfg.sigmas for lam in cfg.lambdas
              for n in cfg.grid_sizes for d in cfg.data]
    return ExperimentResult("max_principle", _run_rows("_row_max_principle", params, jobs),
                            _metadata(cfg))


def exp_schauder(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Schauder ratio ``R`` at ``n`` and ``2n``.

    A row passes when ``R`` is refinement-stable and below the bound.  Rows
    on the sub-sweep ``sigma in {1.5, 1.9, 1.99}`` also carry the ratio to the
    previous sigma's ``R``, which must not exceed ``sigma_step``.  Every row
    carries the largest ``R`` over its lambda sweep.
    """
    params = [dict(kernel=k, sigma=s, lam=lam, alpha=a, n=n, period=cfg.period, data=d,
                   seeds=_seeds(cfg), stability=cfg.tol("stability"), bound=cfg.tol("bound"))
              for k in cfg.kernel for d in cfg.data for n in cfg.grid_sizes
              for a in cfg.alphas for lam in cfg.lambdas for s in cfg.sigmas]
    rows = _run_rows("_row_schauder", params, jobs)
    step = cfg.tol("sigma_step")
    by_key = {(r["kernel"], r["data"], r["n"], r["alpha"], r["lam"], r["sigma"]): r for r in rows}
    for r in rows:
        lam_group = [q.get("R_n_max", math.nan) for q in rows
                     if (q["kernel"], q["data"], q["n"], q["alpha"], q["sigma"])
                     == (r["kernel"], r["data"], r["n"], r["alpha"], r["sigma"])]
        r["R_lambda_sweep_max"] = float(np.nanmax(lam_group)) if lam_group else math.nan
        if r["sigma"] in _SIGMA_SUBSWEEP[1:]:
            prev = _SIGMA_SUBSWEEP[_SIGMA_SUBSWEEP.index(r["sigma"]) - 1]
            q = by_key.get((r["kernel"], r["data"], r["n"], r["alpha"], r["lam"], prev))
            if q is not None and "R_n_max" in q and "R_n_max" in r:
                r["R_prev_sigma"] = q["R_n_max"]
                r["sigma_step_ratio"] = r["R_n_max"] / q["R_n_max"]
                r["sigma_step_tol"] = step
                if r["sigma_step_ratio"] > step:
                    r["passed"] = False
                    r["reason"] = "sigma step ratio above tolerance"
    return ExperimentResult("schauder", rows, _metadata(cfg))


def exp_borderline(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Log-Lipschitz ratio over all grid sizes, with the plain Lipschitz growth."""
    sizes = sorted(cfg.grid_sizes)
    params = [dict(kernel=k, sigma=s, lam=lam, sizes=sizes, period=cfg.period, data=d,
                   stability=cfg.tol("stability"))
              for k in cfg.kernel for d in cfg.data for s in cfg.sigmas for lam in cfg.lambdas]
    return ExperimentResult("borderline", _run_rows("_row_borderline", params, jobs),
                            _metadata(cfg))


def exp_isomorphism(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Forward and backward Zygmund-norm ratios with the solve roundtrip error."""
    params = [dict(kernel=k, sigma=s, lam=lam, alpha=a, n=n, period=cfg.period,
                   seeds=_seeds(cfg), stability=cfg.tol("stability"), bound=cfg.tol("bound"),
                   roundtrip=cfg.tol("roundtrip"))
              for k in cfg.kernel for n in cfg.grid_sizes for a in cfg.alphas
              for s in cfg.sigmas for lam in cfg.lambdas]
    return ExperimentResult("isomorphism", _run_rows("_row_isomorphism", params, jobs),
                            _metadata(cfg))


def exp_green(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Green's function mass rows (``beta`` from ``sigmas``) and Poisson decay rows."""
    rows = []
    if "mass" in cfg.data:
        params = [dict(beta=b, lam=lam, mass_tol=cfg.tol("mass"),
                       pos_tol=cfg.tol("positivity"), cf_tol=cfg.tol("closed_form"))
                  for b in cfg.sigmas for lam in cfg.lambdas]
        rows += _run_rows("_row_green_mass", params, jobs)
    if "decay" in cfg.data:
        params = [dict(kernel=k, sigma=s, exp_tol=cfg.tol("exponent"),
                       stability=cfg.tol("stability"))
                  for k in cfg.kernel for s in cfg.sigmas if s < 2]
        rows += _run_rows("_row_green_decay", params, jobs)
    meta = _metadata(cfg)
    return ExperimentResult("green", rows, meta)


def exp_campanato(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Campanato domination constant ``C`` and Dini flags of input and output."""
    params = [dict(kernel=k, sigma=s, lam=lam, alpha=cfg.alphas[0], n=n, period=cfg.period,
                   data=d, seeds=_seeds(cfg), stability=cfg.tol("stability"))
              for k in cfg.kernel for d in cfg.data for n in cfg.grid_sizes
              for s in cfg.sigmas for lam in cfg.lambdas]
    return ExperimentResult("campanato", _run_rows("_row_campanato", params, jobs),
                            _metadata(cfg))


def exp_commutator(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Commutator Holder ratios; at ``sigma = 1`` also the measured ``N(eps)``."""
    params = [dict(kernel=k, sigma=s, alpha=a, n=n, period=cfg.period, data=d,
                   seeds=_seeds(cfg), stability=cfg.tol("stability"))
              for k in cfg.kernel for d in cfg.data for n in cfg.grid_sizes
              for a in cfg.alphas for s in cfg.sigmas]
    return ExperimentResult("commutator", _run_rows("_row_commutator", params, jobs),
                            _metadata(cfg))


EXPERIMENTS = {
    "max_principle": exp_max_principle,
    "schauder": exp_schauder,
    "borderline": exp_borderline,
    "isomorphism": exp_isomorphism,
    "green": exp_green,
    "campanato": exp_campanato,
    "commutator": exp_commutator,
}

PLOT_COLUMNS = {
    "max_principle": ("lam", "ratio_max"),
    "schauder": ("sigma", "R_n_max"),
    "borderline": ("sigma", "refinement_ratio_worst"),
    "isomorphism": ("alpha", "forward_n"),
    "green": ("beta", "mass_error"),
    "campanato": ("sigma", "C_n"),
    "commutator": ("sigma", "ratio_n"),
}


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    return EXPERIMENTS[cfg.experiment](cfg, jobs=jobs)


# reporting ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def _columns(rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def rows_to_csv(rows) -> str:
    """CSV text with floats at 17 significant digits."""
    buf = io.StringIO()
    cols = _columns(rows)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in cols])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, dict):
        return {str(k): _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def report(results, path, plot_data: bool = False) -> list:
    """Write ``<experiment>.csv`` and ``<experiment>.json`` per result into ``path``.

    Returns the written file paths.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for res in results:
        csv_path = out / f"{res.experiment}.csv"
        csv_path.write_text(rows_to_csv(res.rows), encoding="utf-8")
        summary = dict(res.summary(), metadata=_json_safe(res.metadata))
        json_path = out / f"{res.experiment}.json"
        json_path.write_text(json.dumps(summary, indent=2, sort_keys=False) + "\n",
                             encoding="utf-8")
        written += [csv_path, json_path]
        if plot_data:
            xk, yk = PLOT_COLUMNS[res.experiment]
            pts = [{"x": r[xk], "y": r[yk]} for r in res.rows if xk in r and yk in r]
            p = out / f"{res.experiment}_plot.csv"
            p.write_text(rows_to_csv(pts) if pts else "x,y\n", encoding="utf-8")
            written.append(p)
    return written


def run(config_path=None, out_dir=None, seed=None, jobs: int = 1, plot_data: bool = False,
        only=None, log=print) -> int:
    """Run the configured experiments and write their reports.

    Parameters
    ----------
    config_path : path, optional
        JSON config; without it the defaults of every selected experiment run.
    out_dir : path, optional
        Overrides the ``output`` field; defaults to ``results``.
    seed : int, optional
        Overrides every config seed.
    jobs : int
        Worker processes for row jobs.
    plot_data : bool
        Also write ``(x, y)`` columns per experiment.
    only : str, optional
        Restrict to one experiment id; its defaults are used when the config
        does not mention it.

    Returns
    -------
    int
        0 when every row passes, 1 when some row fails, 2 for config errors.
    """
    try:
        if config_path is not None:
            cfgs = load_config(config_path)
        else:
            cfgs = [default_config(e) for e in EXPERIMENTS]
        if only is not None:
            exp = only.removeprefix("exp_")
            if exp not in EXPERIMENTS:
                raise ConfigError(f"experiment: unknown id {only!r}", field="experiment")
            sel = [c for c in cfgs if c.experiment == exp]
            cfgs = sel or [default_config(exp)]
        if seed is not None:
            if seed < 0:
                raise ConfigError("seed: must be a nonnegative integer", field="seed")
            for c in cfgs:
                c.seed = int(seed)
    except (ConfigError, OSError) as exc:
        log(f"config error: {exc}")
        return 2
    results = []
    for c in cfgs:
        res = run_experiment(c, jobs=jobs)
        results.append(res)
        report([res], out_dir or c.output or "results", plot_data=plot_data)
        s = res.summary()
        log(f"{s['experiment']}: {s['passes']}/{s['rows']} rows passed")
    return 0 if all(r.ok for r in results) else 1
