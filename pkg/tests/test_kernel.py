import numpy as np
import pytest
from hypothesis import given, strategies as st

from levyschauder.errors import DomainError, InvalidKernelError
from levyschauder.kernel import (
    BUILTIN_KERNELS,
    CANCELLATION_RADII,
    CompensatorKind,
    KernelSpec,
    builtin_kernel,
    cancellation_defect,
    compensator,
    compensator_kind,
    ellipticity_check,
    parse_kernel_name,
)


def amp_from(fn):
    def a(x, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
        return np.broadcast_to(fn(np.asarray(x), np.asarray(y)), shape)
    return a


@pytest.mark.parametrize("sigma, y, expected", [
    (0.5, [3.0], 0.0),
    (0.5, [0.1], 0.0),
    (1.0, [0.5], 1.0),
    (1.0, [1.5], 0.0),
    (1.0, [0.3, 0.4], 1.0),
    (1.5, [10.0], 1.0),
    (1.5, [0.0, 10.0], 1.0),
])
def test_compensator_values(sigma, y, expected):
    assert compensator(sigma, np.array(y)) == expected


@pytest.mark.parametrize("sigma", [0.0, 2.0, -1.0, np.nan])
def test_compensator_rejects_sigma(sigma):
    with pytest.raises(DomainError):
        compensator(sigma, np.array([1.0]))


@given(st.floats(0.01, 1.99))
def test_compensator_kind_depends_on_sigma_only(sigma):
    kind = compensator_kind(sigma)
    if sigma < 1:
        assert kind is CompensatorKind.NONE
    elif sigma == 1:
        assert kind is CompensatorKind.UNIT_BALL
    else:
        assert kind is CompensatorKind.FULL


def test_ellipticity_constant_amplitude():
    k = KernelSpec(0.7, amp_from(lambda x, y: np.ones(y.shape[:-1])), 1.0, 1.0)
    rep = ellipticity_check(k, 256)
    assert rep.passed and rep.min_ratio == 1.0 and rep.max_ratio == 1.0


def test_ellipticity_angular_amplitude_2d():
    def a(x, y):
        r = np.linalg.norm(y, axis=-1)
        return 1 + 0.5 * np.sin(y[..., 0] / r * np.pi)

    k = KernelSpec(1.5, amp_from(a), 0.5, 1.5, dim=2)
    rep = ellipticity_check(k, 2048)
    # brute-force extremes of 1 + sin(pi cos t)/2 over a dense angle grid
    t = np.linspace(0, 2 * np.pi, 200001)
    vals = 1 + 0.5 * np.sin(np.pi * np.cos(t))
    assert rep.passed
    assert rep.min_ratio >= vals.min() - 1e-12 and rep.max_ratio <= vals.max() + 1e-12
    assert rep.min_ratio < 0.52 and rep.max_ratio > 1.48


def test_ellipticity_sign_changing_amplitude_rejected():
    k = KernelSpec(0.5, amp_from(lambda x, y: np.sin(y[..., 0])), 0.0, 1.0)
    with pytest.raises(InvalidKernelError, match="amplitude"):
        ellipticity_check(k)


def test_ellipticity_nonfinite_amplitude_rejected():
    k = KernelSpec(0.5, amp_from(lambda x, y: np.full(y.shape[:-1], np.nan)), 0.0, 1.0)
    with pytest.raises(InvalidKernelError):
        k.validate()


def test_ellipticity_bounds_violation_rejected():
    k = KernelSpec(0.5, amp_from(lambda x, y: np.full(y.shape[:-1], 2.0)), 0.5, 1.5)
    assert not ellipticity_check(k).passed
    with pytest.raises(InvalidKernelError):
        k.validate()


@pytest.mark.parametrize("nu, lam", [(-0.1, 1.0), (2.0, 1.0), (0.0, np.inf)])
def test_kernelspec_rejects_bad_bounds(nu, lam):
    with pytest.raises(InvalidKernelError):
        KernelSpec(0.5, amp_from(lambda x, y: np.ones(y.shape[:-1])), nu, lam)


def test_kernelspec_rejects_dim():
    with pytest.raises(DomainError):
        KernelSpec(0.5, amp_from(lambda x, y: np.ones(y.shape[:-1])), 1, 1, dim=3)


@pytest.mark.parametrize("r", [0.1, 1.0, 7.0])
def test_cancellation_symmetric_is_zero(r):
    k = builtin_kernel("fraclap", 1.0)
    assert np.all(cancellation_defect(k, [0.3], r) == 0)


def test_cancellation_nonsymmetric_hand_value():
    # (2 - sigma) r**-1 (a(1) - a(-1)) r with a = 1 + sign(y)/2 at sigma = r = 1
    k = KernelSpec(1.0, amp_from(lambda x, y: 1 + 0.5 * np.sign(y[..., 0])), 0.5, 1.5)
    np.testing.assert_allclose(cancellation_defect(k, [0.0], 1.0), [1.0], rtol=1e-14)


def test_cancellation_2d_isotropic_zero():
    k = builtin_kernel("fraclap", 1.0, dim=2)
    assert np.max(np.abs(cancellation_defect(k, [0.1, 0.2], 0.3))) <= 1e-12


@pytest.mark.parametrize("sigma", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("dim", [1, 2])
def test_cancellation_homogeneity(sigma, dim):
    # for a = a(y/|y|) the first moment on the sphere of radius r scales as r**-sigma
    if dim == 1:
        fn = lambda x, y: 1 + 0.5 * np.sign(y[..., 0])
    else:
        fn = lambda x, y: 1 + 0.5 * y[..., 0] / np.linalg.norm(y, axis=-1)
    k = KernelSpec(sigma, amp_from(fn), 0.5, 1.5, dim=dim)
    base = cancellation_defect(k, np.zeros(dim), 0.25)
    assert np.max(np.abs(base)) > 0.1
    for b in (2.0, 4.0, 8.0):
        np.testing.assert_allclose(cancellation_defect(k, np.zeros(dim), 0.25 * b),
                                   b**-sigma * base, rtol=1e-12, atol=1e-12)


def test_cancellation_rejects_radius():
    with pytest.raises(DomainError):
        cancellation_defect(builtin_kernel("fraclap", 1.0), [0.0], 0.0)


def test_sigma_one_nonsymmetric_rejected():
    k = KernelSpec(1.0, amp_from(lambda x, y: 1 + 0.5 * np.sign(y[..., 0])), 0.5, 1.5)
    with pytest.raises(InvalidKernelError, match="cancellation"):
        k.validate()


def test_nonsym1d_builtin():
    assert builtin_kernel("nonsym1d", 1.5).nu == 0.5
    with pytest.raises(InvalidKernelError):
        builtin_kernel("nonsym1d", 1.0)


def test_cancellation_radii_are_dyadic():
    assert CANCELLATION_RADII[0] == 2.0**-8 and CANCELLATION_RADII[-1] == 2.0**3


@pytest.mark.parametrize("name, dim", [("fraclap", 1), ("fraclap", 2), ("aniso2d", 2),
                                       ("nonsym1d", 1), ("truncated", 1), ("truncated", 2),
                                       ("xdep(0.3)", 1)])
@given(data=st.data())
def test_builtin_amplitude_within_bounds(name, dim, data):
    sigma = 1.5 if name == "nonsym1d" else data.draw(st.sampled_from([0.5, 1.0, 1.5]))
    k = builtin_kernel(name, sigma, dim=dim)
    x = np.array(data.draw(st.lists(st.floats(0, 2 * np.pi), min_size=dim, max_size=dim)))
    y = np.array(data.draw(st.lists(st.floats(-50, 50).filter(lambda v: abs(v) > 1e-6),
                                    min_size=dim, max_size=dim)))
    a = float(k.amp(x, y))
    inside = np.linalg.norm(y) <= 1
    if k.truncated and not inside:
        assert a == 0.0
    else:
        assert k.nu - 1e-12 <= a <= k.lambda_upper + 1e-12


def test_truncated_closed_ball():
    k = builtin_kernel("truncated", 0.5)
    assert k.amp([0.0], [1.0]) == 1.0 and k.amp([0.0], [1.0001]) == 0.0


def test_xdep_factor_and_frozen():
    k = builtin_kernel("xdep", 0.5, eps=0.2)
    assert k.x_dependent and k.nu == pytest.approx(0.8) and k.lambda_upper == pytest.approx(1.2)
    fz = k.frozen([0.0])
    assert not fz.x_dependent
    assert fz.amp([2.0], [0.3]) == pytest.approx(k.amp([0.0], [0.3]))


def test_kernel_value():
    k = builtin_kernel("truncated", 0.5)
    assert k.kernel([0.0], [0.5]) == pytest.approx(1.5 * 0.5**-1.5)


@pytest.mark.parametrize("text, expected", [("fraclap", ("fraclap", None)),
                                            ("xdep(0.1)", ("xdep", 0.1)),
                                            ("xdep(1e-2)", ("xdep", 0.01))])
def test_parse_kernel_name(text, expected):
    assert parse_kernel_name(text) == expected


@pytest.mark.parametrize("text", ["bogus", "xdep(", "fraclap(x)"])
def test_parse_kernel_name_rejects(text):
    with pytest.raises(DomainError):
        parse_kernel_name(text)


def test_builtin_dim_checks():
    with pytest.raises(DomainError):
        builtin_kernel("aniso2d", 1.0, dim=1)
    with pytest.raises(DomainError):
        builtin_kernel("nonsym1d", 0.5, dim=2)
    assert set(BUILTIN_KERNELS) == {"fraclap", "aniso2d", "nonsym1d", "truncated", "xdep"}
