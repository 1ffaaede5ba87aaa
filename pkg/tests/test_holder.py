import math

import numpy as np
import pytest

from aprenorm.dynamics import DyadicWord, fixed_point_family, hyperbolic_fixed_point, presentation, presentation_inverse
from aprenorm.errors import ConfigurationError, ConvergenceError
from aprenorm.holder import (
    DELTA_EXPONENT,
    THETA,
    HolderMeasurement,
    delta_of,
    dh_derivative,
    eps_family,
    fit_extrapolate,
    level_alpha,
    level_alpha_many,
    measure_N,
    orbit_point,
    run_holder,
    s_hat,
)
from aprenorm.series import eval_grad, eval_series

WORDS6 = ("000000", "101101", "110010", "011111")


@pytest.fixture(scope="module")
def fam5(fp):
    return eps_family(fp, 1e-5, 8)


def test_s_hat_zero_and_gate(fp):
    assert np.array_equal(s_hat(fp, 0.0).s.coeffs, fp.series.coeffs)
    with pytest.raises(ConfigurationError):
        s_hat(fp, 2e-3)


def test_eps_family_levels(fp):
    fam = eps_family(fp, 0.0, 3)
    assert np.array_equal(fam.levels[0][0].s.coeffs, fp.series.coeffs)
    fam = eps_family(fp, 1e-4, 4)
    for k, (g, sc) in enumerate(fam.levels):
        s = g.s
        assert abs(eval_series(s, sc.lam, 1.0) + eval_series(s, 0.0, 1.0)) <= 1e-12
        _, p, _ = eval_grad(s, 1.0, 0.0)
        _, q, r1 = eval_grad(s, sc.lam, 1.0)
        _, _, r0 = eval_grad(s, 0.0, 1.0)
        assert sc.mu == pytest.approx(-sc.lam * p * q / (r1 + r0), rel=1e-12)
        assert (s - s_hat(fp, 1e-4 * fp.lam**k).s).norm() == 0.0


def test_delta_formula():
    assert delta_of(1.0, 16) == pytest.approx(3.36e-19, rel=5e-3)
    assert delta_of(2.0, 3) == pytest.approx(2.0 * THETA ** (DELTA_EXPONENT * 3), rel=1e-15)


def test_dh_identity_at_zero_eps(fp):
    fam = eps_family(fp, 0.0, 6)
    for text in WORDS6:
        w = DyadicWord.parse(text)
        p = orbit_point(fp, w)
        # forward and inverse chains are evaluated separately, so identity holds to rounding
        assert np.allclose(dh_derivative(fam, fp, w, p), np.eye(2), rtol=0, atol=1e-12)
        assert measure_N(fam, fp, w, 0.7) <= 1e-12


def test_orbit_point_inverts_to_base(fp):
    base, _ = hyperbolic_fixed_point(fixed_point_family(fp).maps[0])
    for text in WORDS6:
        w = DyadicWord.parse(text)
        q, _ = presentation_inverse(fixed_point_family(fp, "extended"), w, orbit_point(fp, w, "extended"))
        assert np.hypot(float(q.x - base.x), float(q.u - base.u)) <= 1e-12


def test_conjugacy_maps_orbit_points(fp, fam5):
    base, _ = hyperbolic_fixed_point(fixed_point_family(fp).maps[0])
    star = fixed_point_family(fp)
    for text in WORDS6:
        w = DyadicWord.parse(text)
        q, _ = presentation_inverse(star, w, orbit_point(fp, w))
        h = presentation(fam5.family(), w, q)[0]
        direct = presentation(fam5.family(), w, base)[0]
        assert np.hypot(h.x - direct.x, h.u - direct.u) <= 1e-9 * max(1.0, abs(direct.x))


def test_dh_finite_difference(fp, fam5):
    star = fixed_point_family(fp, "extended")
    fe = fam5.family("extended")

    def h(p):
        q, _ = presentation_inverse(star, w, p)
        return np.array(presentation(fe, w, q)[0], float)

    for text in WORDS6[1:]:
        w = DyadicWord.parse(text)
        p = np.array(orbit_point(fp, w), float)
        step = delta_of(math.hypot(*p), w.n) / 10
        D = dh_derivative(fam5, fp, w, p)
        for c in range(2):
            e = np.zeros(2)
            e[c] = step
            fd = (h(p + e) - h(p - e)) / (2 * step)
            assert np.allclose(D[:, c], fd, rtol=1e-5, atol=1e-5 * np.abs(D).max())


def test_N_continuous_in_t(fp, fam5):
    w = DyadicWord.parse("101101")
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    vals = np.array([measure_N(fam5, fp, w, tt) for tt in t])
    jumps = np.abs(np.diff(np.append(vals, vals[0])))
    assert jumps.max() < 10 * (t[1] - t[0]) * vals.max()


def test_level_alpha_basic(fp, fam5):
    m = level_alpha(fam5, fp, 4)
    assert isinstance(m, HolderMeasurement)
    assert len(m.M) == 16 and np.all(m.delta > 0)
    assert 0 < m.alpha < np.inf
    assert m.argmin_word.n == 4
    # the word 0^n is fixed by both families
    assert m.M[0] == 0.0 and m.ratios[0] == np.inf


def test_level_alpha_matches_measure_N(fp, fam5):
    m = level_alpha(fam5, fp, 4, t_grid=16)
    k = 11
    w = DyadicWord.from_int(k, 4)
    direct = max(measure_N(fam5, fp, w, t) for t in 2 * np.pi * np.arange(16) / 16)
    assert m.M[k] == pytest.approx(direct, rel=1e-6)


def test_alpha_monotone_trends(fp):
    fams = [eps_family(fp, e, 6) for e in (1e-4, 1e-5, 1e-6)]
    table = np.array([[m.alpha for m in level_alpha_many(fams, fp, n, 64)] for n in range(3, 7)])
    assert np.all(table > 0)
    assert np.all(np.diff(table, axis=1) > 0)  # smaller eps -> larger exponent
    assert np.all(np.diff(table, axis=0) < 0)  # decreasing in n


def test_grid_halving_small(fp, fam5):
    a = level_alpha(fam5, fp, 5, 512).alpha
    b = level_alpha(fam5, fp, 5, 256).alpha
    assert b == pytest.approx(a, rel=5e-6)


def test_scale_covariance(fp, fam5):
    diffs = []
    for n in (6, 8):
        th = THETA * 2 ** (-1 / (DELTA_EXPONENT * n))
        diffs.append(abs(level_alpha(fam5, fp, n, 128, theta=th).alpha - level_alpha(fam5, fp, n, 128).alpha))
    # halving delta shifts alpha_n by about 0.05 and the shift shrinks slowly with n
    assert diffs[1] < diffs[0] < 0.06


def test_level_determinism(fp, fam5):
    a = level_alpha(fam5, fp, 5, 64)
    b = level_alpha(eps_family(fp, 1e-5, 8), fp, 5, 64)
    assert np.array_equal(a.M, b.M) and np.array_equal(a.argmax_t, b.argmax_t)


def test_fit_synthetic():
    a, k = 0.0123, (0.8, -1.5, 2.25, -0.75)
    data = [(n, a * math.exp(sum(kk / n ** (i + 1) for i, kk in enumerate(k)))) for n in range(3, 16)]
    f = fit_extrapolate(data)
    assert f.a == pytest.approx(a, rel=1e-10)
    assert np.allclose(f.k, k, rtol=1e-8, atol=1e-8)
    assert f.rel_lsq_error < 1e-12
    assert f.n_range == (3, 15)


def test_fit_requires_levels():
    with pytest.raises(ConfigurationError):
        fit_extrapolate([(n, 0.1) for n in range(3, 7)])
    with pytest.raises(ConvergenceError):
        fit_extrapolate([(n, -0.1 if n == 5 else 0.1) for n in range(3, 10)])


def test_run_holder_reports(fp):
    rep = run_holder(fp, (1e-4,), levels=range(2, 8), t_grid=32)
    assert set(rep.alphas[1e-4]) == set(range(2, 8))
    lv = rep.levels_csv().splitlines()
    assert lv[0] == "eps,n,alpha_n" and len(lv) == 7
    assert rep.fit_csv().splitlines()[0] == "eps,alpha,k1,k2,k3,k4,rel_lsq_error"
    curve = rep.curve_csv().splitlines()
    assert len(curve) == 7 and curve[1].count(",") == 3
