import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from levyschauder.errors import DomainError
from levyschauder.field import Field, GridSpec, from_function, lacunary_field, random_field
from levyschauder.normlab import (
    ModulusData,
    campanato_sequence,
    difference_quotient,
    dini_integral,
    dini_transform,
    holder_seminorm,
    lipschitz_constant,
    log_lipschitz_constant,
    modulus_of_continuity,
    norm_report,
    zygmund_norm,
    zygmund_seminorm_extension,
    zygmund_seminorm_secdiff,
)

seeds = st.integers(0, 2**31 - 1)
G256 = GridSpec(1, 256)


def brute_holder(v, period, alpha):
    # every ordered pair, torus distance
    n = v.size
    i, j = np.triu_indices(n, 1)
    d = np.abs(i - j) * period / n
    d = np.minimum(d, period - d)
    return np.max(np.abs(v[i] - v[j]) / d**alpha)


@pytest.mark.parametrize("dim", [1, 2])
def test_constant_field_norms_vanish(dim):
    g = GridSpec(dim, 64)
    f = Field(g, np.full(g.shape, 1.7))
    assert holder_seminorm(f, 0.5) == 0
    assert zygmund_seminorm_secdiff(f, 1.0) == 0
    assert zygmund_seminorm_extension(f, 1.0) <= 1e-14
    assert log_lipschitz_constant(f) == 0
    assert all(v <= 1e-12 for v in campanato_sequence(f).values())
    assert difference_quotient(f, 0.5, [0.3] * dim).sup_norm() <= 1e-14


@pytest.mark.parametrize("alpha", [0.2, 0.5, 1.0])
@pytest.mark.parametrize("seed", [0, 1])
def test_holder_matches_brute_force(alpha, seed):
    f = random_field(G256, 0.6, seed)
    assert holder_seminorm(f, alpha) == pytest.approx(brute_holder(f.values, G256.period, alpha),
                                                      rel=1e-12)


def test_holder_of_cosine():
    f = from_function(GridSpec(1, 4096), np.cos)
    assert abs(lipschitz_constant(f) - 1) <= 2 / 4096


def test_holder_rejects_alpha():
    f = random_field(G256, 0.5, 0)
    for a in (0.0, 1.5):
        with pytest.raises(DomainError):
            holder_seminorm(f, a)


@given(seeds, st.floats(0.05, 0.9), st.floats(0.05, 0.9))
def test_holder_order_monotone(seed, a1, a2):
    a1, a2 = sorted((a1, a2))
    f = random_field(G256, 0.5, seed)
    assert holder_seminorm(f, a1) <= (G256.period / 2) ** (a2 - a1) * holder_seminorm(f, a2) * (1 + 1e-12)


@given(seeds, st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3), st.sampled_from([0.3, 0.7, 1.0]))
def test_seminorms_homogeneous(seed, c, alpha):
    f = random_field(G256, 0.5, seed)
    assert holder_seminorm(f * c, alpha) == pytest.approx(abs(c) * holder_seminorm(f, alpha), rel=1e-12)
    assert zygmund_seminorm_secdiff(f * c, alpha) == pytest.approx(
        abs(c) * zygmund_seminorm_secdiff(f, alpha), rel=1e-12)


def test_secdiff_of_cosine_matches_sampled_steps():
    g = GridSpec(1, 512)
    f = from_function(g, np.cos)
    hs = g.spacing * 2.0 ** np.arange(0, 9)
    hs = hs[hs <= g.period / 4 * (1 + 1e-12)]
    expected = np.max(2 * (1 - np.cos(hs)) / hs)
    assert zygmund_seminorm_secdiff(f, 1.0) == pytest.approx(expected, rel=1e-12)


def test_secdiff_rejects_alpha():
    with pytest.raises(DomainError):
        zygmund_seminorm_secdiff(random_field(G256, 0.5, 0), 2.0)


def test_lacunary_zygmund_stable_while_lipschitz_grows():
    sec, lip = [], []
    for n in (256, 512, 1024, 2048):
        w = lacunary_field(GridSpec(1, n))
        sec.append(zygmund_seminorm_secdiff(w, 1.0))
        lip.append(lipschitz_constant(w))
    for a, b in zip(sec, sec[1:]):
        assert abs(b / a - 1) <= 0.2
    assert all(b > a for a, b in zip(lip, lip[1:]))
    # one extra lacunary mode per doubling: roughly linear in log n
    steps = np.diff(lip)
    assert np.all(steps > 0.2) and np.ptp(steps) <= 0.5 * steps.mean()


def test_log_lipschitz_of_unit_lipschitz_mode():
    f = from_function(GridSpec(1, 1024), np.sin)
    assert log_lipschitz_constant(f) <= 1 / np.log(2)


def test_campanato_constant_zero_and_radius_cap():
    f = random_field(G256, 0.5, 3)
    seq = campanato_sequence(f)
    assert max(seq) <= np.log2(G256.period / 2)
    with pytest.raises(DomainError):
        campanato_sequence(f, l_max=2)


@given(seeds)
def test_campanato_bounded_by_modulus(seed):
    f = random_field(G256, 0.5, seed)
    seq = campanato_sequence(f)
    cap = G256.period / 2
    m = modulus_of_continuity(f, [min(2.0 ** (l + 1), cap) for l in seq])
    for (l, M), w in zip(seq.items(), m.omega):
        assert M <= 2 * w * (1 + 1e-12)


def _campanato_ratio(f, alpha):
    seq = campanato_sequence(f)
    return max(2.0 ** (-alpha * l) * M for l, M in seq.items()) / holder_seminorm(f, alpha)


def test_campanato_holder_equivalence():
    for seed in range(3):
        r = [_campanato_ratio(random_field(GridSpec(1, n), 0.5, seed), 0.5) for n in (256, 512, 1024)]
        assert all(0.05 <= x <= 1 for x in r)
        for a, b in zip(r, r[1:]):
            assert abs(b / a - 1) <= 0.2


def test_campanato_2d_strided():
    g = GridSpec(2, 64)
    f = random_field(g, 0.5, 1)
    seq = campanato_sequence(f)
    assert all(np.isfinite(v) and v >= 0 for v in seq.values())
    assert seq[max(seq)] > seq[min(seq)]


def test_extension_secdiff_bracket_stable():
    brackets = []
    for n in (256, 512, 1024):
        r = [zygmund_seminorm_extension(f, 0.5) / zygmund_seminorm_secdiff(f, 0.5)
             for f in (random_field(GridSpec(1, n), 0.5, s) for s in range(4))]
        brackets.append((min(r), max(r)))
    for (lo0, hi0), (lo1, hi1) in zip(brackets, brackets[1:]):
        assert abs(lo1 / lo0 - 1) <= 0.2 and abs(hi1 / hi0 - 1) <= 0.2
    C = max(max(hi, 1 / lo) for lo, hi in brackets)
    assert C <= 10


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_extension_order_robust(alpha):
    f = random_field(GridSpec(1, 512), alpha, 2)
    k = int(np.floor(alpha)) + 1
    ratio = zygmund_seminorm_extension(f, alpha, k=k + 1) / zygmund_seminorm_extension(f, alpha, k=k)
    assert 0.2 <= ratio <= 5


def test_extension_rejects_order():
    f = random_field(G256, 0.5, 0)
    with pytest.raises(DomainError):
        zygmund_seminorm_extension(f, 1.0, k=1)
    with pytest.raises(DomainError):
        zygmund_seminorm_extension(f, 0.0)
    with pytest.raises(DomainError):
        zygmund_norm(f, 0.5, route="bogus")


@given(seeds, st.floats(0.1, 1.9), st.floats(0.1, 1.9))
def test_zygmund_embedding(seed, a1, a2):
    lo, hi = sorted((a1, a2))
    f = random_field(G256, 1.0, seed)
    C = max(1.0, (G256.period / 4) ** (hi - lo))
    assert zygmund_norm(f, lo, "secdiff") <= C * zygmund_norm(f, hi, "secdiff") * (1 + 1e-12)


@given(seeds, st.integers(1, 128), st.sampled_from([(0.5, 0.2), (0.8, 0.5), (0.9, 0.1)]))
def test_difference_quotient_constant_two(seed, m, ab):
    alpha, beta = ab
    f = random_field(G256, alpha, seed)
    fq = difference_quotient(f, beta, m * G256.spacing)
    assert holder_seminorm(fq, alpha - beta) <= 2 * holder_seminorm(f, alpha) * (1 + 1e-9)


def test_difference_quotient_rejects_zero_step():
    with pytest.raises(DomainError):
        difference_quotient(random_field(G256, 0.5, 0), 0.5, 0.0)


def _quotient_constants(n, seed):
    g = GridSpec(1, n)
    f = random_field(g, 0.7, seed)
    hs = g.spacing * 2.0 ** np.arange(int(np.log2(n // 2)))
    quots = [difference_quotient(f, 0.4, h) for h in hs]
    lam = max(zygmund_norm(q, 0.3, "secdiff") for q in quots) / zygmund_norm(f, 0.7, "secdiff")
    K = max(holder_seminorm(q, 0.3) for q in quots)
    rec = holder_seminorm(f, 0.7) / (K + f.sup_norm())
    return lam, rec


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_quotient_and_reconstruction_constants_stable(seed):
    a = _quotient_constants(256, seed)
    b = _quotient_constants(1024, seed)
    for x, y in zip(a, b):
        assert abs(y / x - 1) <= 0.2
    assert b[0] <= 4 and b[1] <= 2


@given(seeds)
def test_modulus_monotone_and_doubling(seed):
    f = random_field(G256, 0.5, seed)
    m = modulus_of_continuity(f)
    assert np.all(np.diff(m.omega) >= 0)
    assert np.all(m.omega[1:] <= 2 * m.omega[:-1] * (1 + 1e-12))
    assert m(np.array([1e-6]))[0] >= 0


def test_modulus_rejects_large_radius():
    with pytest.raises(DomainError):
        modulus_of_continuity(random_field(G256, 0.5, 0), [4.0])


def test_modulus_data_validation():
    with pytest.raises(DomainError):
        ModulusData([1.0, 0.5], [0.1, 0.2])
    with pytest.raises(DomainError):
        ModulusData([0.5, 1.0], [0.1])


R = 2.0 ** np.arange(-40, 1)


@pytest.mark.parametrize("gamma", [0.25, 0.5, 1.0])
def test_dini_power_law(gamma):
    val, ok = dini_integral(ModulusData.from_model(lambda s: s**gamma, R))
    assert ok and val == pytest.approx(1 / gamma, rel=1e-2)


def test_dini_inverse_log_flagged_divergent():
    val, ok = dini_integral(ModulusData.from_model(lambda s: 1 / np.log(2 / s), R))
    assert not ok and val == np.inf


def test_dini_inverse_log_squared_converges():
    # antiderivative 1 / log(2/s), evaluated at the top radius 1/16
    r = 2.0 ** np.arange(-40, -3)
    val, ok = dini_integral(ModulusData.from_model(lambda s: 1 / np.log(2 / s) ** 2, r))
    assert ok and val == pytest.approx(1 / np.log(32), rel=1e-2)


@pytest.mark.parametrize("gamma, a, b", [(0.5, 0.5, 2.0), (1.0, 0.3, 3.0), (0.25, 0.7, 2.0)])
def test_dini_transform_power_law(gamma, a, b):
    # the held top value must sit far enough out for a*b**gamma close to 1
    big = 2.0 ** np.arange(-20, 81)
    m = dini_transform(ModulusData.from_model(lambda s: s**gamma, big), a, b)
    sel = m.radii <= 2.0**-5
    expected = m.radii[sel] ** gamma / (1 - a * b**gamma)
    np.testing.assert_allclose(m.omega[sel], expected, rtol=1e-2)


@pytest.mark.parametrize("a, b", [(0.0, 2.0), (1.0, 2.0), (0.5, 1.0)])
def test_dini_transform_rejects(a, b):
    with pytest.raises(DomainError):
        dini_transform(ModulusData.from_model(np.sqrt, R), a, b)


def test_norm_report():
    f = random_field(G256, 0.5, 1)
    rep = norm_report(f, alphas=(0.5, 1.0, 1.5))
    assert rep.holder[1.5] is None and rep.zygmund_secdiff[1.5] is not None
    assert rep.sup_norm == f.sup_norm()
    d = rep.to_dict()
    assert set(d) == {"holder", "zygmund_secdiff", "zygmund_ext", "campanato", "log_lip", "sup_norm"}
    back = json.loads(json.dumps(d))
    assert back["holder"]["0.5"] == rep.holder[0.5]
    vals = [v for k in ("holder", "zygmund_secdiff", "zygmund_ext", "campanato")
            for v in d[k].values() if v is not None]
    assert all(np.isfinite(v) and v >= 0 for v in vals)
