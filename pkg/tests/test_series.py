import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aprenorm.errors import ConfigurationError, CompositionError
from aprenorm.series import (
    Series2,
    SymSeries2,
    basis_raw_norm,
    basis_vector,
    compose,
    dimension,
    dumps,
    eval_grad,
    eval_series,
    from_coords,
    index_map,
    index_set,
    inverse_index,
    loads,
    multiply,
    norm_rho,
    partial,
    to_coords,
)

RHO = 1.75


def random_poly(rng, terms=10, degree=8, scale=1.0):
    t = {}
    for _ in range(terms):
        i = int(rng.integers(0, degree + 1))
        j = int(rng.integers(0, degree + 1 - i))
        t[(i, j)] = t.get((i, j), 0.0) + scale * rng.normal()
    return Series2.from_terms(t, degree=degree), t


def brute_eval(terms, x, y):
    return sum(c * x**i * y**j for (i, j), c in terms.items())


def test_norm_monomial_and_zero():
    assert norm_rho(Series2.monomial(2, 1, 5)) == pytest.approx(1.75**3, rel=0, abs=1e-15)
    assert norm_rho(Series2.zero(5)) == 0.0


def test_norm_matches_brute_sum(rng):
    s, t = random_poly(rng)
    assert norm_rho(s) == pytest.approx(sum(abs(c) * RHO ** (i + j) for (i, j), c in t.items()), rel=1e-14)


def test_multiply_small_cases():
    x, y = Series2.monomial(1, 0, 4), Series2.monomial(0, 1, 4)
    assert multiply(x, y).allclose(Series2.monomial(1, 1, 4), 0)
    one = Series2.constant(1.0, 4)
    assert multiply(one + x, one - x).allclose(one - Series2.monomial(2, 0, 4), 1e-15)


def test_multiply_rejects_mismatched_rho():
    with pytest.raises(ConfigurationError):
        multiply(Series2.constant(1.0, 3), Series2.constant(1.0, 3, rho=1.0))


def test_banach_algebra(rng):
    for _ in range(100):
        s, _ = random_poly(rng)
        t, _ = random_poly(rng)
        assert norm_rho(s * t) <= norm_rho(s) * norm_rho(t) * (1 + 1e-14)


def test_compose_linear_and_identity(rng):
    x, y = Series2.monomial(1, 0, 6), Series2.monomial(0, 1, 6)
    out = compose(x + y, x + x, y + y + y)
    assert out.allclose(x + x + y + y + y, 1e-15)
    s, _ = random_poly(rng, degree=6)
    assert compose(s, x, y).allclose(s, 1e-14)


def test_compose_point_evaluation(rng):
    for _ in range(20):
        s, _ = random_poly(rng, degree=10)
        a, _ = random_poly(rng, degree=10, scale=0.1)
        b, _ = random_poly(rng, degree=10, scale=0.1)
        # keep the inner polynomials low enough that truncation is invisible
        a, b = a.truncate(1).extend(10), b.truncate(1).extend(10)
        c = compose(s.truncate(5).extend(10), a, b)
        x0, y0 = rng.uniform(-0.3, 0.3, 2)
        want = eval_series(s.truncate(5), eval_series(a, x0, y0), eval_series(b, x0, y0))
        assert eval_series(c, x0, y0) == pytest.approx(want, abs=1e-12)


def test_compose_divergence_guard():
    s = Series2.from_terms({(k, 0): 1.0 for k in range(30)}, degree=30)
    big = Series2.constant(1e4, 30) + Series2.monomial(1, 0, 30)
    with pytest.raises(CompositionError):
        compose(s, big, Series2.monomial(0, 1, 30))


def test_partial_examples():
    s = Series2.monomial(2, 1, 5)
    assert partial(s, 1).allclose(Series2.monomial(1, 1, 4, coeff=2.0), 0)
    assert partial(s, 2).allclose(Series2.monomial(2, 0, 4), 0)


def test_partial_finite_difference(rng):
    s, _ = random_poly(rng)
    h = 1e-6
    for _ in range(10):
        x0, y0 = rng.uniform(-0.5, 0.5, 2)
        fd = (eval_series(s, x0 + h, y0) - eval_series(s, x0 - h, y0)) / (2 * h)
        assert eval_series(partial(s, 1), x0, y0) == pytest.approx(fd, abs=1e-8)
        _, gx, gy = eval_grad(s, x0, y0)
        assert gx == pytest.approx(eval_series(partial(s, 1), x0, y0), abs=1e-13)
        assert gy == pytest.approx(eval_series(partial(s, 2), x0, y0), abs=1e-13)


def test_eval_examples(rng):
    x, y = Series2.monomial(1, 0, 3), Series2.monomial(0, 1, 3)
    assert eval_series(x + y, 0.2, 0.3) == pytest.approx(0.5, abs=1e-16)
    assert eval_series(Series2.zero(3), 0.7, -0.1) == 0.0
    for _ in range(20):
        s, t = random_poly(rng)
        x0, y0 = rng.uniform(-1, 1, 2)
        want = brute_eval(t, x0, y0)
        assert eval_series(s, x0, y0) == pytest.approx(want, rel=1e-14, abs=1e-14 * norm_rho(s))


def test_basis_examples():
    assert basis_vector(-1, 0, degree=5).allclose(Series2.constant(1.0, 5), 1e-15)
    assert basis_raw_norm(-1, 0) == 1.0
    assert basis_raw_norm(0, 1) == pytest.approx(4.59375, abs=1e-14)
    raw = basis_vector(0, 1, degree=5, normalized=False)
    assert raw[1, 1] == 1.0 and raw[2, 0] == 0.5
    for i, j in index_set(20):
        b = basis_vector(i, j, degree=20)
        assert isinstance(b, SymSeries2)
        assert b.norm() == pytest.approx(1.0, abs=1e-14)


def test_basis_rejects_bad_pair():
    with pytest.raises(ConfigurationError):
        basis_vector(2, 1)
    with pytest.raises(ConfigurationError):
        basis_vector(-2, 0)


def test_index_map_examples():
    assert index_map(-1, 0, 20) == 1
    assert index_map(-1, 20, 20) == 21
    assert index_map(0, 0, 20) == 22
    assert dimension(20) == 131


@pytest.mark.parametrize("N", [10, 15, 20, 25])
def test_index_bijection(N):
    brute = [(i, j) for i in range(-1, N + 1) for j in range(max(0, i), N + 2) if i + j < N or (i == -1 and j <= N)]
    assert dimension(N) == len(brute) == len(index_set(N))
    assert sorted(index_set(N)) == sorted(brute)
    for k, (i, j) in enumerate(index_set(N), 1):
        assert index_map(i, j, N) == k
        assert inverse_index(k, N) == (i, j)


def test_coords_round_trip(rng):
    v = rng.normal(size=dimension(12))
    s = from_coords(v, 12, degree=14)
    assert s.is_symmetric()
    assert np.allclose(to_coords(s, 12), v, atol=1e-14)


def test_serialization_round_trip(rng):
    s, _ = random_poly(rng, degree=12)
    text = dumps(s)
    assert text.splitlines()[0] == "degree=12 rho=1.75"
    back = loads(text)
    assert np.array_equal(back.coeffs, s.coeffs)
    assert dumps(back) == text


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6), st.floats(-1, 1), st.floats(-1, 1))
def test_product_evaluates_pointwise(c, x0, y0):
    s = Series2.from_terms({(0, 0): c[0], (1, 0): c[1], (0, 1): c[2]}, degree=4)
    t = Series2.from_terms({(0, 0): c[3], (1, 1): c[4], (0, 2): c[5]}, degree=4)
    want = eval_series(s, x0, y0) * eval_series(t, x0, y0)
    assert eval_series(s * t, x0, y0) == pytest.approx(want, rel=1e-12, abs=1e-12)
