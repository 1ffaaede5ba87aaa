import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aprenorm.dynamics import (
    DyadicWord,
    MapPoint,
    TwistMap,
    all_words,
    apply_inverse,
    apply_map,
    check_orbit,
    fixed_point_family,
    hyperbolic_fixed_point,
    jacobian,
    odometer,
    periodic_orbit,
    presentation,
    presentation_inverse,
    reflect,
)
from aprenorm.errors import ConfigurationError
from aprenorm.operator import ScalingPair
from aprenorm.series import Series2

X_STAR = (0.577606201171875, 0.577629923820496)
E_PLUS = (-2.0576171875, -2.057373046875)
E_MINUS = (-0.486053466796875, -0.48602294921875)
STABLE_U = (-0.779815673828125, -0.77978515625)

xs = st.floats(-0.2, 1.0)
us = st.floats(-0.15, 0.15)


@pytest.fixture(scope="module")
def fmap(fp):
    return TwistMap(fp.s_star, scalings=ScalingPair(fp.lam, fp.mu))


@pytest.fixture(scope="module")
def fixed(fmap):
    return hyperbolic_fixed_point(fmap)


def test_toy_shear():
    x, y = Series2.monomial(1, 0, 3), Series2.monomial(0, 1, 3)
    m = TwistMap(x + y, trim=False)
    for p in [(0.1, 0.2), (-0.3, 0.05)]:
        q = apply_map(m, p)
        assert q == pytest.approx((-p[0] - p[1], -p[1]), abs=1e-15)


def test_reflect_involution():
    p = MapPoint(0.3, -0.2)
    assert reflect(reflect(p)) == p


def test_round_trip(fmap, rng):
    for _ in range(100):
        p = (rng.uniform(-0.2, 1.0), rng.uniform(-0.15, 0.15))
        q = apply_inverse(fmap, apply_map(fmap, p))
        assert np.hypot(q[0] - p[0], q[1] - p[1]) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(xs, us)
def test_symplectic_property(fp, x, u):
    m = TwistMap(fp.s_star, scalings=ScalingPair(fp.lam, fp.mu))
    J = jacobian(m, (x, u))
    assert abs(np.linalg.det(J) - 1.0) <= 1e-11


@settings(max_examples=200, deadline=None)
@given(xs, us)
def test_reversibility_property(fp, x, u):
    m = TwistMap(fp.s_star, scalings=ScalingPair(fp.lam, fp.mu))
    q = m.apply(reflect(m.apply(reflect((x, u)))))
    assert np.hypot(q[0] - x, q[1] - u) <= 1e-11


def test_jacobian_finite_difference(fmap, rng):
    h = 1e-7
    for _ in range(20):
        p = np.array([rng.uniform(-0.2, 1.0), rng.uniform(-0.15, 0.15)])
        J = jacobian(fmap, p)
        for c in range(2):
            e = np.zeros(2)
            e[c] = h
            fd = (np.array(apply_map(fmap, p + e)) - np.array(apply_map(fmap, p - e))) / (2 * h)
            assert np.allclose(J[:, c], fd, atol=1e-7)


def test_inverse_jacobian_consistent(fmap):
    p = (0.4, 0.05)
    q, J = fmap.apply_with_jacobian(p)
    _, Ji = fmap.apply_with_jacobian(q, inverse=True)
    assert np.allclose(Ji @ J, np.eye(2), atol=1e-12)


def test_hyperbolic_fixed_point(fixed):
    p, eig = fixed
    assert X_STAR[0] < p.x < X_STAR[1]
    assert p.u == 0.0
    assert E_PLUS[0] < eig.e_plus < E_PLUS[1]
    assert E_MINUS[0] < eig.e_minus < E_MINUS[1]
    assert STABLE_U[0] < eig.stable[1] < STABLE_U[1]
    assert eig.e_plus * eig.e_minus == pytest.approx(1.0, abs=1e-10)
    assert eig.residual <= 1e-13


def test_unstable_is_reflected_stable(fixed):
    _, eig = fixed
    assert np.allclose(eig.unstable, [eig.stable[0], -eig.stable[1]], atol=1e-10)


def test_odometer_examples():
    assert str(odometer(DyadicWord.parse("000"))) == "100"
    assert str(odometer(DyadicWord.parse("111"))) == "000"
    for w in all_words(10):
        assert odometer(w).k == (w.k + 1) % 1024
    w = DyadicWord.parse("1011")
    for _ in range(16):
        w = odometer(w)
    assert str(w) == "1011"


def test_word_validation():
    with pytest.raises(ConfigurationError):
        DyadicWord((0, 2))
    with pytest.raises(ConfigurationError):
        DyadicWord.from_int(8, 3)


def test_presentation_zero_word(fp, fixed):
    p, _ = fixed
    fam = fixed_point_family(fp)
    for n in (1, 4, 8):
        q, J = presentation(fam, DyadicWord((0,) * n), p)
        assert q.x == pytest.approx(fp.lam**n * p.x, rel=1e-13)
        assert q.u == 0.0
        assert np.allclose(J, np.diag([fp.lam**n, fp.mu**n]), rtol=1e-13, atol=0)


@pytest.mark.parametrize("precision", ["double", "extended"])
def test_presentation_inverse_round_trip(fp, fixed, precision):
    # inversion expands by 1/mu per level, so double precision loses
    # about log10(1/mu) digits per level; 80-bit keeps 1e-12 through n = 8
    p, _ = fixed
    fam = fixed_point_family(fp, precision)
    for text in ("011", "10110", "11111", "10110101"):
        w = DyadicWord.parse(text)
        q, J = presentation(fam, w, p)
        back, Ji = presentation_inverse(fam, w, q)
        tol = 1e-12 if precision == "extended" else 2.2e-16 * fp.mu ** -w.n
        assert np.hypot(float(back.x - p.x), float(back.u - p.u)) <= tol
        assert np.allclose(np.asarray(Ji @ J, float), np.eye(2), atol=1e-9 * float(np.abs(Ji).max()))


def test_orbit_small_levels(fp, fixed, fmap):
    p, _ = fixed
    o0 = periodic_orbit(fp, 0)
    assert len(o0) == 1 and np.allclose(o0.points[0], p, atol=0)
    o1 = periodic_orbit(fp, 1)
    a = MapPoint(*o1.points[0])
    b = fmap.apply(a)
    assert np.allclose(b, o1.points[1], atol=1e-11)
    assert np.allclose(fmap.apply(b), a, atol=1e-11)


def test_orbit_odometer_n8(fp, fmap):
    orb = periodic_orbit(fp, 8)
    scale = np.abs(orb.points).max()
    for k in range(len(orb)):
        img = fmap.apply(orb.points[k])
        assert np.hypot(*(np.array(img) - orb.points[(k + 1) % len(orb)])) <= 1e-9 * scale
    assert check_orbit(orb, fmap)


def test_orbit_points_distinct(fp):
    orb = periodic_orbit(fp, 12)
    assert len(orb) == 4096
    assert len(np.unique(orb.points, axis=0)) == 4096


def test_piece_diameters_shrink(fp, fixed):
    p, _ = fixed
    fam = fixed_point_family(fp)
    diam = []
    for n in range(2, 9):
        d = 0.0
        for k in range(1 << (n - 1)):
            w0 = DyadicWord.from_int(k, n - 1).bits
            a = presentation(fam, DyadicWord(w0 + (0,)), p)[0]
            b = presentation(fam, DyadicWord(w0 + (1,)), p)[0]
            d = max(d, np.hypot(a.x - b.x, a.u - b.u))
        diam.append(d)
    rates = np.array(diam[1:]) / np.array(diam[:-1])
    assert np.all(rates < 0.3)


def test_extended_matches_double(fp, fixed):
    p, _ = fixed
    w = DyadicWord.parse("1101001")
    qd, Jd = presentation(fixed_point_family(fp), w, p)
    qe, Je = presentation(fixed_point_family(fp, "extended"), w, p)
    assert np.allclose(qd, qe, atol=1e-14)
    assert np.allclose(Jd, Je, rtol=1e-10, atol=1e-14)


def test_orbit_csv(fp):
    text = periodic_orbit(fp, 3).to_csv()
    lines = text.splitlines()
    assert lines[0] == "n,k,bits,x,u"
    assert len(lines) == 9
    assert lines[2].startswith("3,1,100,")
