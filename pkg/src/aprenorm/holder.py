"""Hölder regularity of the conjugacy between Cantor sets of nearby maps.

The map ``F_eps`` generated by ``s_hat(eps)`` is a smooth conjugate of the
fixed point, displaced along its unstable coordinate-change direction.  Its
presentation functions use the family member ``s_hat(eps lam*^k)`` at
level ``k``.  On each piece of the level-``n`` orbit the conjugacy is
``h = Psi^eps_w o (Psi*_w)^{-1}``; comparing ``Dh`` at ``p_w`` and at a
point a distance ``delta(w)`` away gives a local Hölder exponent, and a
fit in ``1/n`` extrapolates it to infinite depth.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _dyn
from .dynamics import (
    DyadicWord,
    Family,
    TwistMap,
    _raise_status,
    fixed_point_family,
    hyperbolic_fixed_point,
    presentation,
    presentation_inverse,
)
from .errors import ConfigurationError, ConvergenceError, RenormError
from .operator import ScalingPair, eps_conjugate, midpoint, scaling_lambda, scaling_mu

THETA = 0.272
DELTA_EXPONENT = 2.042
EPS_GATE = 1e-3
TABLE_EPS = (1e-4, 1e-5, 1e-6, 1e-7, 1.593584796420859e-8)
NORMS = {"spectral": 0, "frobenius": 1}


def s_hat(fp, eps):
    """The displaced generating function at parameter ``eps``."""
    if abs(eps) > EPS_GATE:
        raise ConfigurationError(f"|eps| must be at most {EPS_GATE:g}")
    g = eps_conjugate(fp.s_star, eps)
    res = g.s.symmetry_residual()
    if res > 1e-10 * max(1.0, g.s.norm()):
        raise RenormError(f"s_hat left the symmetric subspace (residual {res:.3e})")
    return g


def family_scalings(g, check=True):
    """``lam`` from ``s(lam, 1) + s(0, 1) = 0`` and the closed-form ``mu``."""
    lam = scaling_lambda(g, 1.0)
    Z = midpoint(g).Z if check else None
    mu = scaling_mu(g, lam, 1.0, Z=Z, cross_check=check)
    return ScalingPair(lam, mu)


@dataclass
class EpsFamily:
    eps: float
    levels: list  # (GeneratingFunction, ScalingPair) for k = 0..n-1
    lam_star: float
    _family: Family | None = field(default=None, repr=False)

    @property
    def depth(self):
        return len(self.levels)

    def family(self, precision="double"):
        if self._family is None or self._family.precision != precision:
            maps = [TwistMap(g, precision=precision, scalings=sc) for g, sc in self.levels]
            self._family = Family(maps, [sc for _, sc in self.levels])
        return self._family


def eps_family(fp, eps, n):
    """Levels ``s_hat(eps lam*^k)``, ``k < n``, with their own scalings."""
    levels = []
    for k in range(max(n, 1)):
        e = eps * fp.lam**k
        if e == 0.0:
            levels.append((fp.s_star, ScalingPair(fp.lam, fp.mu)))
        else:
            g = s_hat(fp, e)
            levels.append((g, family_scalings(g)))
    return EpsFamily(float(eps), levels, fp.lam)


def delta_of(pnorm, n, theta=THETA, exponent=DELTA_EXPONENT):
    return theta ** (exponent * n) * pnorm


def dh_derivative(fam, fp, w, p, precision="double"):
    """``D(Psi^eps_w o (Psi*_w)^{-1})`` at ``p``."""
    star = fixed_point_family(fp, precision)
    q, Jinv = presentation_inverse(star, w, p)
    _, Je = presentation(fam.family(precision), w, q)
    return Je @ Jinv


def orbit_point(fp, w, precision="double"):
    star = fixed_point_family(fp, precision)
    base, _ = hyperbolic_fixed_point(star.maps[0])
    return presentation(star, w, base)[0]


def _matrix_norm(A, norm):
    return float(np.linalg.norm(A, 2 if norm == "spectral" else "fro"))


def measure_N(fam, fp, w, t, theta=THETA, exponent=DELTA_EXPONENT, norm="spectral", precision="double"):
    """``||Dh(p_w) - Dh(p_w + delta (cos t, sin t))||``."""
    p = orbit_point(fp, w, precision)
    delta = delta_of(math.hypot(p[0], p[1]), w.n, theta, exponent)
    q = (p[0] + delta * math.cos(t), p[1] + delta * math.sin(t))
    A = dh_derivative(fam, fp, w, p, precision)
    B = dh_derivative(fam, fp, w, q, precision)
    return _matrix_norm(np.asarray(A - B, float), norm)


@dataclass(frozen=True)
class HolderMeasurement:
    eps: float
    n: int
    M: np.ndarray  # per word, ordered by k(w)
    argmax_t: np.ndarray
    delta: np.ndarray
    t_grid: int

    @property
    def ratios(self):
        # an exact zero difference (the word 0^n) carries no information
        with np.errstate(divide="ignore"):
            return np.log(self.M) / np.log(self.delta)

    @property
    def alpha(self):
        return float(np.min(self.ratios))

    @property
    def argmin_word(self):
        return DyadicWord.from_int(int(np.argmin(self.ratios)), self.n)


def t_values(t_grid):
    return 2.0 * np.pi * np.arange(t_grid) / t_grid


def level_alpha_many(fams, fp, n, t_grid=512, theta=THETA, exponent=DELTA_EXPONENT, norm="spectral"):
    """:func:`level_alpha` for several families sharing the fixed-point chains."""
    if n < 1:
        raise ConfigurationError("level must be at least 1")
    star = fixed_point_family(fp)
    base, _ = hyperbolic_fixed_point(star.maps[0])
    fams = list(fams)
    members = [f.family() for f in fams]
    for f in members:
        f.check_depth(n)
    deg = max(f.n for f in members)
    E = len(members)
    Ce = np.zeros((E, n, deg + 1, deg + 1))
    lam_e = np.empty((E, n))
    mu_e = np.empty((E, n))
    for e, f in enumerate(members):
        for k in range(n):
            lv = f.level(k)
            d = f.C.shape[1]
            Ce[e, k, :d, :d] = f.C[lv]
            lam_e[e, k] = f.lam[lv]
            mu_e[e, k] = f.mu[lv]
    t = t_values(t_grid)
    count = 1 << n
    M = np.empty((E, count))
    argt = np.zeros((E, count), np.int64)
    delta = np.empty(count)
    status = np.zeros(count, np.int64)
    radius = min(star.radius, min(f.radius for f in members))
    dfac = theta ** (exponent * n)
    bad = _dyn.holder_level(
        star.C, star.n, star.lam, star.mu, Ce, deg, lam_e, mu_e, n, base.x, base.u,
        np.cos(t), np.sin(t), dfac, radius, NORMS[norm], M, argt, delta, status,
    )
    if bad >= 0:
        w = DyadicWord.from_int(int(bad), n)
        try:
            _raise_status(int(status[bad]), f"word {w}")
        except RenormError as exc:
            raise ConvergenceError(f"Hölder measurement failed at level {n}: {exc}") from exc
    return [HolderMeasurement(f.eps, n, M[e].copy(), t[argt[e]], delta.copy(), t_grid) for e, f in enumerate(fams)]


def level_alpha(fam, fp, n, t_grid=512, **kw):
    return level_alpha_many([fam], fp, n, t_grid, **kw)[0]


# extrapolation --------------------------------------------------------------------
@dataclass(frozen=True)
class FitParams:
    a: float
    k: tuple
    rel_lsq_error: float
    n_range: tuple

    def model(self, n):
        n = np.asarray(n, float)
        return self.a * np.exp(sum(kk / n ** (i + 1) for i, kk in enumerate(self.k)))


def fit_extrapolate(meas, n_range=None, order=4):
    """Least squares for ``log alpha_n = log a + sum_i k_i / n**i``.

    ``meas`` is a sequence of :class:`HolderMeasurement` or of
    ``(n, alpha_n)`` pairs.
    """
    pts = [(m.n, m.alpha) if isinstance(m, HolderMeasurement) else (int(m[0]), float(m[1])) for m in meas]
    if n_range is not None:
        lo, hi = n_range
        pts = [(n, a) for n, a in pts if lo <= n <= hi]
    pts.sort()
    if len(pts) < max(6, order + 1):
        raise ConfigurationError(f"need at least {max(6, order + 1)} levels for the fit")
    n = np.array([p[0] for p in pts], float)
    alpha = np.array([p[1] for p in pts])
    if np.any(alpha <= 0):
        raise ConvergenceError("non-positive alpha_n cannot be fitted in log space")
    A = np.column_stack([np.ones_like(n)] + [n ** -(i + 1) for i in range(order)])
    coef, _, rank, _ = np.linalg.lstsq(A, np.log(alpha), rcond=None)
    if rank < A.shape[1]:
        raise ConvergenceError("rank-deficient fit")
    fit = FitParams(float(np.exp(coef[0])), tuple(float(c) for c in coef[1:]), 0.0, (int(n[0]), int(n[-1])))
    rel = np.sqrt(np.sum(((alpha - fit.model(n)) / alpha) ** 2)) / len(n)
    return FitParams(fit.a, fit.k, float(rel), fit.n_range)


# reports --------------------------------------------------------------------------
@dataclass
class HolderReport:
    levels: tuple
    t_grid: int
    alphas: dict  # eps -> {n: alpha_n}
    fits: dict  # eps -> FitParams

    def levels_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "n", "alpha_n"])
        for eps, row in self.alphas.items():
            for n, a in sorted(row.items()):
                w.writerow([repr(eps), n, repr(a)])
        return buf.getvalue()

    def fit_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "alpha", "k1", "k2", "k3", "k4", "rel_lsq_error"])
        for eps, f in self.fits.items():
            w.writerow([repr(eps), repr(f.a), *map(repr, f.k), repr(f.rel_lsq_error)])
        return buf.getvalue()

    def curve_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "n", "alpha_n", "fit"])
        for eps, row in self.alphas.items():
            f = self.fits.get(eps)
            for n, a in sorted(row.items()):
                w.writerow([repr(eps), n, repr(a), repr(float(f.model(n))) if f else ""])
        return buf.getvalue()


def run_holder(fp, eps_list=TABLE_EPS, levels=range(3, 13), t_grid=512, norm="spectral", progress=None):
    """Measure ``alpha_n`` on every level for every ``eps`` and fit each."""
    levels = tuple(levels)
    depth = max(levels)
    fams = [eps_family(fp, e, depth) for e in eps_list]
    alphas = {float(e): {} for e in eps_list}
    for n in levels:
        for meas in level_alpha_many(fams, fp, n, t_grid, norm=norm):
            alphas[meas.eps][n] = meas.alpha
        if progress:
            progress(n)
    fits = {}
    for eps, row in alphas.items():
        try:
            fits[eps] = fit_extrapolate(sorted(row.items()))
        except (ConfigurationError, ConvergenceError):
            pass
    return HolderReport(levels, t_grid, alphas, fits)
