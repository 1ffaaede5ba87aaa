import numpy as np
import pytest

from aprenorm.errors import ConfigurationError
from aprenorm.fixedpoint import (
    DELTA1_INTERVAL,
    PSI_NORM_BOUND,
    classify_products,
    dumps_record,
    eigen_spectrum,
    find_fixed_point,
    jacobian_matrix,
    load_or_compute,
    load_record,
    nearest_rank,
    psi_vector,
    reality_report,
    save_record,
    seed_family,
    spectrum,
)
from aprenorm.series import dimension, from_coords

# golden constants of this implementation (no printed source value exists for mu*)
MU_STAR = 0.06111013821230849
LAMBDA_STAR = -0.24887528871852288


@pytest.fixture(scope="module")
def spec20(fp):
    return classify_products(spectrum(fp, 20), fp.lam, fp.mu)


def test_fixed_point_record(fp):
    assert fp.residual <= 1e-10
    assert fp.degree == 40
    assert fp.s_star.normalization_residual() <= 1e-12
    assert fp.series.symmetry_residual() <= 1e-12
    assert fp.lam == pytest.approx(LAMBDA_STAR, rel=1e-12)
    assert fp.mu == pytest.approx(MU_STAR, rel=1e-10)
    assert sum(fp.newton_steps) <= 20


def test_seed_family_is_normalized():
    for b in (0.5, 1.0, 2.0):
        assert seed_family(b).normalization_residual() <= 1e-14


def test_cache_round_trip(fp, tmp_path):
    path = save_record(fp, tmp_path / "fp.txt")
    back = load_record(path)
    assert np.array_equal(back.series.coeffs, fp.series.coeffs)
    assert (back.lam, back.mu, back.residual) == (fp.lam, fp.mu, fp.residual)
    assert dumps_record(back) == dumps_record(fp)
    assert path.read_text().splitlines()[-1].startswith("lambda=")


def test_load_or_compute_uses_cache(cache_dir, fp):
    got = load_or_compute(40, cache_dir)
    assert np.array_equal(got.series.coeffs, fp.series.coeffs)


def test_newton_from_perturbation(fp, rng):
    d = from_coords(rng.normal(size=dimension(12)), 12, degree=fp.degree)
    seed = fp.series + d * (1e-4 / d.norm())
    got = find_fixed_point(seed=seed)
    assert sum(got.newton_steps) <= 10
    assert (got.series - fp.series).norm() <= 1e-9


def test_jacobian_is_real_and_square(fp):
    D = jacobian_matrix(fp, 10)
    assert D.shape == (dimension(10), dimension(10))
    assert D.dtype == np.float64


def test_jacobian_rejects_large_N(fp):
    with pytest.raises(ConfigurationError):
        jacobian_matrix(fp, 41)


def test_eigen_spectrum_rotation():
    rep = eigen_spectrum(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert rep[1].value == pytest.approx(1j)
    assert rep[2].value == pytest.approx(-1j)


def test_leading_eigenvalues(spec20, fp, table_eigs):
    assert spec20[1].re == pytest.approx(8.72109720060341, rel=1e-6)
    assert DELTA1_INTERVAL[0] <= spec20[1].re <= DELTA1_INTERVAL[1]
    assert spec20[2].re == pytest.approx(-4.01807670479891, rel=1e-6)
    assert spec20[2].re * fp.lam == pytest.approx(1.0, rel=1e-6)
    assert spec20[3].re == pytest.approx(-0.248875288718523, rel=1e-8)
    for k in range(4, 11):
        assert spec20[k].value == pytest.approx(table_eigs[k][0], rel=1e-5)


def test_low_modes_real(spec20):
    for k in range(1, 32):
        assert abs(spec20[k].im) <= 1e-11


def test_spectrum_conjugate_closed(spec20):
    vals = spec20.values()
    for z in vals[vals.imag != 0]:
        assert np.min(np.abs(vals - np.conj(z))) <= 1e-12 * abs(z)


def test_spectrum_N_stable(fp, spec20):
    s25 = spectrum(fp, 25)
    for k in range(1, 11):
        assert s25[k].value == pytest.approx(spec20[k].value, rel=1e-6)


def test_product_tags(spec20):
    assert spec20[2].tag == (-1, 0)
    assert spec20[3].tag == (1, 0)
    assert spec20[6].tag == (2, 0)
    assert spec20[7].tag == (3, 0)
    assert spec20[1].tag is None


def test_reality_transitions(fp):
    table = reality_report(fp, [10, 15, 20, 25], [32, 33, 60, 61, 62, 63])
    ten = {e.rank: e for e in table[10]}
    assert ten[32].im > 0 and ten[33].value == pytest.approx(np.conj(ten[32].value), rel=1e-13)
    assert all(e.is_real for e in table[15] if e.rank in (32, 33))
    fifteen = {e.rank: e for e in table[15]}
    assert fifteen[62].im != 0 and fifteen[63].value == pytest.approx(np.conj(fifteen[62].value), rel=1e-13)
    assert all(e.is_real for e in table[20]) and all(e.is_real for e in table[25])


def test_nearest_rank(spec20):
    assert nearest_rank(spec20, -4.018) == (2, pytest.approx(abs(spec20[2].re + 4.018) / 4.018))


def test_psi_vector(fp):
    rec = psi_vector(fp)
    assert rec.norm >= PSI_NORM_BOUND
    assert rec.richardson_ratio == pytest.approx(2.0, abs=0.05)
    assert rec.psi.symmetry_residual() <= 1e-8 * rec.norm
