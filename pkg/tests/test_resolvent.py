import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from levyschauder.errors import DivergenceError, DomainError, GridMismatchError
from levyschauder.field import Field, GridSpec, from_function, random_field
from levyschauder.kernel import builtin_kernel
from levyschauder.operator import apply_quadrature, apply_spectral
from levyschauder.resolvent import (
    difference_kernel,
    green_function,
    solve_constant,
    solve_variable,
    stable_density,
)
from levyschauder.symbol import symbol_table

seeds = st.integers(0, 2**31 - 1)


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("sigma", [0.5, 1.0, 1.5])
def test_cosine_resolvent(sigma, lam):
    g = GridSpec(1, 128)
    f = from_function(g, np.cos)
    u = solve_constant(symbol_table(builtin_kernel("fraclap", sigma), g), lam, f)
    np.testing.assert_allclose(u.values, -f.values / (1 + lam), atol=1e-5 / (1 + lam))


@pytest.mark.parametrize("lam", [1e-3, 0.5, 100.0])
def test_constant_resolvent(lam):
    g = GridSpec(2, 64)
    f = Field(g, np.full(g.shape, 3.0))
    u = solve_constant(symbol_table(builtin_kernel("aniso2d", 1.0), g), lam, f)
    np.testing.assert_allclose(u.values, -3.0 / lam, rtol=1e-14)


@pytest.mark.parametrize("name, dim", [("fraclap", 1), ("nonsym1d", 1), ("truncated", 1),
                                       ("aniso2d", 2)])
def test_resolvent_roundtrip(name, dim):
    g = GridSpec(dim, 128 if dim == 1 else 64)
    t = symbol_table(builtin_kernel(name, 1.5, dim=dim), g)
    f = random_field(g, 0.5, 2)
    u = solve_constant(t, 0.7, f)
    assert (apply_spectral(t, u) - 0.7 * u - f).sup_norm() <= 1e-10 * f.sup_norm()


@pytest.mark.parametrize("name", ["fraclap", "nonsym1d", "truncated"])
@given(seeds, st.floats(0.01, 100.0))
def test_maximum_principle(name, seed, lam):
    g = GridSpec(1, 256)
    t = symbol_table(builtin_kernel(name, 1.5), g)
    f = random_field(g, 0.5, seed)
    u = solve_constant(t, lam, f)
    assert lam * u.sup_norm() <= f.sup_norm() * (1 + 1e-8)


@pytest.mark.parametrize("lam", [0.0, -1.0, np.nan, np.inf])
def test_solve_constant_rejects_lambda(lam):
    g = GridSpec(1, 64)
    with pytest.raises(DomainError):
        solve_constant(symbol_table(builtin_kernel("fraclap", 1.0), g), lam, Field(g, np.zeros(64)))


def test_solve_constant_grid_mismatch():
    t = symbol_table(builtin_kernel("fraclap", 1.0), GridSpec(1, 64))
    with pytest.raises(GridMismatchError):
        solve_constant(t, 1.0, Field(GridSpec(1, 128), np.zeros(128)))


# stable densities and Green's functions

def test_stable_density_cauchy():
    y = np.array([0.0, 1e-7, 0.3, 2.0, 50.0, 1e4, 1e8])
    np.testing.assert_allclose(stable_density(1.0)(y), 1 / (np.pi * (1 + y * y)), rtol=1e-6)


def test_stable_density_gaussian():
    y = np.array([0.0, 0.5, 2.0, 6.0, 30.0])
    np.testing.assert_allclose(stable_density(2.0)(y), np.exp(-y * y / 4) / np.sqrt(4 * np.pi),
                               rtol=1e-12)


@pytest.mark.parametrize("beta", [0.0, 2.5, -1.0])
def test_stable_density_rejects(beta):
    with pytest.raises(DomainError):
        stable_density(beta)


def _qawf_green(beta, lam, x):
    # (1/pi) int_0^inf cos(xi x) / (xi**beta + lam) dxi
    f = lambda s: 1 / (s**beta + lam)
    return np.array([integrate.quad(f, 0, np.inf, weight="cos", wvar=abs(v), limlst=200,
                                    epsabs=1e-13)[0] / np.pi
                     for v in x])


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_green_mass_and_positivity(beta, lam):
    G = green_function(beta, lam)
    assert G.mass_error <= 1e-4
    assert G.positive


@pytest.mark.parametrize("beta, lam", [(2.0, 1.0), (2.0, 3.0), (1.0, 1.0), (1.5, 0.5), (1.9, 1.0)])
def test_green_against_direct_inversion(beta, lam):
    G = green_function(beta, lam)
    idx = np.searchsorted(G.x, [0.25, 1.0, 3.0, 10.0])
    x = G.x[idx]
    np.testing.assert_allclose(G.values[idx], _qawf_green(beta, lam, x), rtol=1e-5)
    if beta == 2.0:
        r = np.sqrt(lam)
        np.testing.assert_allclose(G.values[idx], np.exp(-r * x) / (2 * r), rtol=1e-10)


def test_green_singular_at_origin_for_small_beta():
    G = green_function(0.5, 1.0)
    assert np.isinf(G.values[G.x == 0]).all()
    assert G.params["half_width"] == 40.0


@pytest.mark.parametrize("kw", [dict(lam=0.0), dict(lam=1.0, half_width=20.0),
                                dict(lam=1.0, spacing=0.1)])
def test_green_rejects(kw):
    with pytest.raises(DomainError):
        green_function(1.0, **kw)


# frozen-kernel Picard iteration

def test_picard_constant_kernel_one_step():
    g = GridSpec(1, 128)
    f = random_field(g, 0.5, 3)
    u, tr = solve_variable(builtin_kernel("fraclap", 1.5), 1.0, f, tol=1e-10)
    assert tr.converged and tr.iterations == 1
    exact = solve_constant(symbol_table(builtin_kernel("fraclap", 1.5), g), 1.0, f)
    assert (u - exact).sup_norm() <= 1e-12


def test_difference_kernel_vanishes_at_freezing_point():
    k = builtin_kernel("xdep", 1.5, eps=0.2)
    dk = difference_kernel(k, 0.0)
    assert dk.x_dependent and dk.amp([0.0], [0.3]) == 0.0
    assert dk.amp([1.0], [0.3]) == pytest.approx(k.amp([0.0], [0.3]) - k.amp([1.0], [0.3]))


@pytest.mark.parametrize("sigma", [0.5, 1.5])
def test_picard_contraction_scales_with_eps(sigma):
    g = GridSpec(1, 128)
    f = random_field(g, 0.5, 1)
    c = []
    for eps in (0.2, 0.1, 0.05):
        u, tr = solve_variable(builtin_kernel("xdep", sigma, eps=eps), 1.0, f, tol=1e-10)
        assert tr.converged
        c.append(tr.contraction_factor())
    for a, b in zip(c, c[1:]):
        assert 0.3 <= b / a <= 0.7


def test_picard_solution_satisfies_equation():
    g = GridSpec(1, 128)
    k = builtin_kernel("xdep", 1.0, eps=0.1)
    f = random_field(g, 0.5, 5)
    u, tr = solve_variable(k, 2.0, f, tol=1e-10)
    res = apply_quadrature(k, u) - 2.0 * u - f
    assert res.sup_norm() <= 1e-9 * f.sup_norm()


def test_picard_unique_from_two_starts():
    g = GridSpec(1, 128)
    k = builtin_kernel("xdep", 1.5, eps=0.1)
    f = random_field(g, 0.5, 6)
    a, _ = solve_variable(k, 1.0, f, tol=1e-11)
    b, _ = solve_variable(k, 1.0, f, tol=1e-11, u0=random_field(g, 0.3, 99) * 10)
    assert (a - b).sup_norm() <= 1e-10 * a.sup_norm()


@given(seeds, st.sampled_from([0.05, 0.1, 0.2]))
def test_picard_trace_invariants(seed, eps):
    g = GridSpec(1, 64)
    f = random_field(g, 0.5, seed)
    _, tr = solve_variable(builtin_kernel("xdep", 1.5, eps=eps), 1.0, f, tol=1e-8)
    assert len(tr.iterates) == tr.iterations + 1 == len(tr.contraction_estimates) + 1
    assert tr.final_residual == tr.iterates[-1]
    assert tr.converged == (tr.final_residual <= tr.tolerance)
    assert 0 < tr.contraction_factor() < 1


def test_picard_max_iter_reports_unconverged():
    g = GridSpec(1, 64)
    _, tr = solve_variable(builtin_kernel("xdep", 1.5, eps=0.2), 1.0, random_field(g, 0.5, 1),
                           tol=1e-14, max_iter=3)
    assert not tr.converged and tr.iterations == 3


def test_picard_divergence_carries_trace():
    g = GridSpec(1, 128)
    with pytest.raises(DivergenceError) as info:
        solve_variable(builtin_kernel("xdep", 0.5, eps=0.9), 1e-3, random_field(g, 0.5, 1),
                       tol=1e-10, max_iter=60)
    tr = info.value.trace
    assert not tr.converged and len(tr.iterates) >= 4
    assert all(b >= a for a, b in zip(tr.iterates[-4:], tr.iterates[-3:]))


def test_picard_rejects_lambda():
    g = GridSpec(1, 64)
    with pytest.raises(DomainError):
        solve_variable(builtin_kernel("xdep", 0.5, eps=0.1), -1.0, Field(g, np.zeros(64)))
