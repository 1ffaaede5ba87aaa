"""Period-doubling renormalization of symmetric generating functions.

A generating function ``s`` defines the reversible twist map
``(x, -s(y, x)) -> (y, s(x, y))``.  Its second iterate passes through the
midpoint ``Z(x, y)`` solving ``s(x, Z) + s(y, Z) = 0``, and conjugating by
``(x, u) -> (lam x, mu u)`` gives

    R[s](x, y) = s(Z(lam x, lam y), lam y) / mu.

The scalings are fixed by ``Z(lam, 0) = a`` and ``d1 R[s](1, 0) = 1`` where
``a`` is the anchor point on the x-axis.  For a normalized ``s``
(``s(1, 0) = 0``, ``d1 s(1, 0) = 1``) the anchor is 1.  Off the normalized
set the anchor follows the root of ``s(., 0)`` near 1 so that ``R[s]`` is
normalized again (see :func:`renormalize`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConvergenceError, DegenerateError, RenormError
from .series import Series2, _kernels, compose, _weights, eval_grad, eval_series, partial, powers

TOL_NORMALIZED = 1e-12
TOL_MID = 1e-13
TOL_ROOT = 1e-14
MID_RHO = 0.5
ANCHORS = ("root", "unit")


def _as_series(g):
    return g.s if isinstance(g, GeneratingFunction) else g


@dataclass(frozen=True)
class GeneratingFunction:
    s: Series2

    @property
    def rho(self):
        return self.s.rho

    @property
    def degree(self):
        return self.s.degree

    def normalization_residual(self):
        v, d1, _ = eval_grad(self.s, 1.0, 0.0)
        return max(abs(v), abs(d1 - 1.0))

    @property
    def normalized(self):
        return self.normalization_residual() <= TOL_NORMALIZED


@dataclass(frozen=True)
class ScalingPair:
    lam: float
    mu: float

    def in_gate(self):
        return -1.0 < self.lam < 0.0 and abs(self.mu) < abs(self.lam)


@dataclass(frozen=True)
class MidpointFunction:
    Z: Series2
    residual: float
    iterations: int


# small series utilities -------------------------------------------------------
def _pad(c, n):
    out = np.zeros((n + 1, n + 1))
    k = min(c.shape[0], n + 1)
    out[:k, :k] = c[:k, :k]
    return out


def _rows_in_x(c, n):
    """``Q_j(x) = sum_i c[i, j] x**i`` as coefficient arrays, one per j."""
    m = c.shape[0] - 1
    out = np.zeros((m + 1, n + 1, n + 1))
    k = min(m, n)
    out[:, : k + 1, 0] = c[: k + 1, :].T
    return out


def _horner(rows, z, n, deriv=False):
    """``sum_j rows[j] * z**j`` (and its z-derivative) in the series algebra."""
    m = rows.shape[0] - 1
    val = rows[m].copy()
    der = np.zeros((n + 1, n + 1))
    for j in range(m - 1, -1, -1):
        if deriv:
            der = _kernels.tri_mul(der, z, n) + val
        val = _kernels.tri_mul(val, z, n) + rows[j]
    return (val, der) if deriv else val


def _newton_scalar(f, x0, tol=TOL_ROOT, maxiter=60, what="root"):
    x = float(x0)
    for _ in range(maxiter):
        v, d = f(x)
        if d == 0.0 or not np.isfinite(d):
            raise DegenerateError(f"{what}: zero derivative at {x}")
        step = v / d
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    v, _ = f(x)
    if abs(v) > max(tol, 64 * np.finfo(float).eps * abs(x)) or not np.isfinite(x):
        raise ConvergenceError(f"{what}: Newton did not converge (|g|={abs(v):.3e})", residual=abs(v), iterate=x)
    return x


# midpoint -----------------------------------------------------------------------
def midpoint(g, z0_seed=1.0, tol=TOL_MID, maxiter=40, mid_rho=MID_RHO):
    """Series solution ``Z`` of ``s(x, Z) + s(y, Z) = 0``.

    Starts from the closed-form constant and linear parts and runs Newton in
    the series algebra.  The residual is measured in the weighted norm on
    the subdisk of radius ``mid_rho`` (the operator only evaluates ``Z`` on
    ``|x|, |y| <= |lam| rho``).
    """
    s = _as_series(g)
    n = s.degree
    c = s.coeffs

    def f0(z):
        v, _, d2 = eval_grad(s, 0.0, z)
        return v, d2

    z0 = _newton_scalar(f0, z0_seed, what="midpoint constant term")
    _, d1, d2 = eval_grad(s, 0.0, z0)
    if abs(d2) < 1e-14:
        raise DegenerateError("degenerate twist: d2 s(0, Z0) vanishes")
    z1 = -d1 / (2.0 * d2)
    Z = np.zeros((n + 1, n + 1))
    Z[0, 0] = z0
    if n >= 1:
        Z[1, 0] = Z[0, 1] = z1
    qx = _rows_in_x(c, n)
    rows = qx + np.swapaxes(qx, 1, 2)  # Q_j(x) + Q_j(y)
    w = _weights(n, mid_rho)
    prev = np.inf
    res = np.inf
    for it in range(1, maxiter + 1):
        val, der = _horner(rows, Z, n, deriv=True)
        res = float(np.sum(np.abs(val) * w))
        if res <= tol or (it > 8 and res >= prev):
            break
        if abs(der[0, 0]) < 1e-14:
            raise DegenerateError("degenerate twist: midpoint denominator has zero constant term")
        step = _kernels.tri_mul(val, _kernels.tri_reciprocal(der, n), n)
        Z = Z - step
        Z = 0.5 * (Z + Z.T)
        prev = res
    else:
        it = maxiter
    scale = max(1.0, s.norm(mid_rho))
    if res > max(tol, 1e3 * np.finfo(float).eps * scale):
        raise ConvergenceError(f"midpoint Newton stalled at residual {res:.3e}", residual=res, iterate=Z)
    return MidpointFunction(Series2._wrap(Z, s.rho, n), res, it)


# scalings -----------------------------------------------------------------------
def anchor_point(g, seed=1.0):
    """Root of ``s(., 0)`` near ``seed`` (equals 1 for normalized ``s``)."""
    s = _as_series(g)

    def f(x):
        v, d1, _ = eval_grad(s, x, 0.0)
        return v, d1

    return _newton_scalar(f, seed, what="anchor point")


def scaling_lambda(g, anchor=1.0, seed=-0.25, bracket=(-0.5, -0.05), check_bracket=True):
    """Root of ``s(lam, a) + s(0, a)`` (``a = anchor``)."""
    s = _as_series(g)
    c0 = eval_series(s, 0.0, anchor)

    def f(lam):
        v, d1, _ = eval_grad(s, lam, anchor)
        return v + c0, d1

    if check_bracket:
        lo, hi = f(bracket[0])[0], f(bracket[1])[0]
        if lo * hi > 0:
            raise RenormError(f"no sign change of s(lam,{anchor})+s(0,{anchor}) on {bracket}")
    return _newton_scalar(f, seed, what="lambda")


def scaling_mu(g, lam, anchor=1.0, Z=None, cross_check=True, tol=1e-10):
    """Closed-form ``mu``; optionally cross-checked through the midpoint series.

    The second route differentiates ``x -> s(Z(x, y), y)`` at ``(lam, 0)``.
    """
    s = _as_series(g)
    _, p, _ = eval_grad(s, anchor, 0.0)
    _, q, r1 = eval_grad(s, lam, anchor)
    _, _, r0 = eval_grad(s, 0.0, anchor)
    den = r1 + r0
    if den == 0.0 or q == 0.0 or p == 0.0:
        raise DegenerateError("degenerate scaling: mu vanishes or its denominator does")
    mu = -lam * p * q / den
    if cross_check:
        mu2 = scaling_mu_midpoint(s, lam, Z)
        if abs(mu - mu2) > tol * max(1.0, abs(mu)):
            raise RenormError(f"mu routes disagree: closed form {mu!r} vs midpoint {mu2!r}")
    return mu


def scaling_mu_midpoint(g, lam, Z=None):
    s = _as_series(g)
    if Z is None:
        Z = midpoint(s).Z
    z, zx, _ = eval_grad(Z, lam, 0.0)
    _, s1, _ = eval_grad(s, z, 0.0)
    return lam * s1 * zx


# the operator --------------------------------------------------------------------
class Renormalization:
    """All intermediate objects of one application of ``R`` at ``s``.

    Holding them makes the first variation cheap: :meth:`derivative` costs a
    handful of series products per direction.
    """

    def __init__(self, g, anchor="root", check=True):
        if anchor not in ANCHORS:
            raise ConfigurationError(f"anchor must be one of {ANCHORS}")
        s = _as_series(g)
        self.s = s
        n = self.n = s.degree
        self.anchor_mode = anchor
        self.a = anchor_point(s) if anchor == "root" else 1.0
        mid = midpoint(s)
        self.mid = mid
        Z = self.Z = mid.Z
        lam = self.lam = scaling_lambda(s, self.a, check_bracket=check)
        mu = self.mu = scaling_mu(s, lam, self.a, Z=Z, cross_check=check)
        if not np.isfinite(mu) or not np.isfinite(lam):
            raise DegenerateError("scalings are not finite")
        if check and abs(eval_series(Z, lam, 0.0) - self.a) > 1e-8:
            raise RenormError("midpoint series does not pass through the anchor at (lam, 0)")
        idx = np.arange(n + 1)
        lampow = lam ** idx
        self.A = A = Z.coeffs * np.outer(lampow, lampow)
        # s(A, lam y) = sum_i A**i P_i(y),  P_i(y) = sum_j c_ij lam**j y**j
        self.Apow = np.stack([p.coeffs for p in powers(Series2._wrap(A, s.rho, n), n)])
        self.Zpow = np.stack([p.coeffs for p in powers(Z, n)])
        c = s.coeffs
        W = self._subst_A(c)
        self.W = W
        self.out = Series2._wrap(W / mu, s.rho, n)
        d1 = partial(s, 1).extend(n).coeffs
        d2 = partial(s, 2).extend(n).coeffs
        self.s1A = self._subst_A(d1)
        self.s2A = self._subst_A(d2)
        den = self._subst_Z_xy(d2)
        if abs(den[0, 0]) < 1e-14:
            raise DegenerateError("degenerate twist: midpoint denominator vanishes")
        self.inv_den = _kernels.tri_reciprocal(den, n)
        self.eulerA = A * np.add.outer(idx, idx)
        # scalar data for the variations of a, lam and mu
        self._scalar_setup()

    # substitutions that are linear in the coefficient array
    def _subst_A(self, c):
        """``sum_ij c_ij A**i (lam y)**j``."""
        n = self.n
        cl = c * (self.lam ** np.arange(n + 1))[None, :]
        T = np.tensordot(cl.T, self.Apow, axes=([1], [0]))  # T[j] = sum_i cl_ij A**i
        out = np.zeros((n + 1, n + 1))
        for j in range(n + 1):
            out[:, j:] += T[j][:, : n + 1 - j]
        return out

    def _subst_Z_xy(self, c):
        """``sum_ij c_ij (x**i + y**i) Z**j``."""
        n = self.n
        R = np.tensordot(c, self.Zpow, axes=([1], [0]))  # R[i] = sum_j c_ij Z**j
        out = np.zeros((n + 1, n + 1))
        for i in range(n + 1):
            if not R[i].any():
                continue
            out[i:, :] += R[i][: n + 1 - i, :]
            out[:, i:] += R[i][:, : n + 1 - i]
        return out

    def _scalar_setup(self):
        s, lam, a = self.s, self.lam, self.a
        d1 = partial(s, 1)
        d2 = partial(s, 2)
        self.p = eval_grad(s, a, 0.0)[1]
        self.q = eval_grad(s, lam, a)[1]
        self.den = eval_grad(s, lam, a)[2] + eval_grad(s, 0.0, a)[2]
        _, self.s11_a0, _ = eval_grad(d1, a, 0.0)
        _, self.s11_la, self.s12_la = eval_grad(d1, lam, a)
        _, self.s21_la, self.s22_la = eval_grad(d2, lam, a)
        _, _, self.s22_0a = eval_grad(d2, 0.0, a)

    @property
    def scalings(self):
        return ScalingPair(self.lam, self.mu)

    def scalar_variations(self, ds):
        """``(da, dlam, dmu)`` for a perturbation ``ds`` (coefficient array)."""
        n = self.n
        lam, a, mu = self.lam, self.a, self.mu
        dsS = Series2._wrap(ds, self.s.rho, n)
        if self.anchor_mode == "root":
            da = -eval_series(dsS, a, 0.0) / self.p
        else:
            da = 0.0
        v_la, d1_la, d2_la = eval_grad(dsS, lam, a)
        v_0a, _, d2_0a = eval_grad(dsS, 0.0, a)
        _, d1_a0, _ = eval_grad(dsS, a, 0.0)
        dlam = -(v_la + v_0a + self.den * da) / self.q
        dp = d1_a0 + self.s11_a0 * da
        dq = d1_la + self.s11_la * dlam + self.s12_la * da
        dden = d2_la + d2_0a + self.s21_la * dlam + (self.s22_la + self.s22_0a) * da
        dmu = mu * (dlam / lam + dp / self.p + dq / self.q - dden / self.den)
        return da, dlam, dmu

    def derivative_coeffs(self, ds):
        n = self.n
        ds = _pad(np.asarray(ds, float), n)
        ds = np.where(_weights(n, 1.0) > 0, ds, 0.0)
        _, dlam, dmu = self.scalar_variations(ds)
        idx = np.arange(n + 1)
        lampow = self.lam ** idx
        num = self._subst_Z_xy(ds)
        dZ = -_kernels.tri_mul(num, self.inv_den, n)
        dA = dZ * np.outer(lampow, lampow) + (dlam / self.lam) * self.eulerA
        dW = self._subst_A(ds) + _kernels.tri_mul(self.s1A, dA, n)
        # d/dlam of the second slot: s_2(A, lam y) * y
        dW[:, 1:] += dlam * self.s2A[:, :-1]
        return dW / self.mu - (dmu / self.mu) * self.out.coeffs

    def derivative(self, ds):
        c = ds.coeffs if isinstance(ds, Series2) else ds
        return Series2._wrap(self.derivative_coeffs(c), self.s.rho, self.n)


def renormalize(g, anchor="root", check=True):
    """``R[s]`` and the scalings used.

    With ``anchor="unit"`` the scalings follow the literal conditions
    ``s(lam, 1) + s(0, 1) = 0`` and the closed-form ``mu``; this agrees with
    the default on normalized input but lets ``s(1, 0)`` grow like ``1/mu``
    under iteration.
    """
    r = Renormalization(g, anchor=anchor, check=check)
    out = r.out
    if check:
        res = out.symmetry_residual()
        if res > 1e-9 * max(1.0, out.norm()):
            raise RenormError(f"renormalization broke symmetry (residual {res:.3e})")
    return GeneratingFunction(out), r.scalings


def d_renormalize(g, ds, anchor="root"):
    return Renormalization(g, anchor=anchor).derivative(_as_series(ds))


def eps_conjugate(g, eps):
    """The coordinate-change family through ``s`` in the unstable direction.

    ``s((1-e)x + e(1-e)^2 x^2, (1-e)y + e(1-e)^2 y^2) (1 + 2e(1-e)y) / (1+e)``;
    ``eps = 0`` returns ``s`` unchanged.
    """
    s = _as_series(g)
    if eps == 0.0:
        return GeneratingFunction(s)
    n, rho = s.degree, s.rho
    e = float(eps)
    a = Series2.from_terms({(1, 0): 1 - e, (2, 0): e * (1 - e) ** 2}, degree=n, rho=rho)
    b = Series2.from_terms({(0, 1): 1 - e, (0, 2): e * (1 - e) ** 2}, degree=n, rho=rho)
    factor = Series2.from_terms({(0, 0): 1.0 / (1 + e), (0, 1): 2 * e * (1 - e) / (1 + e)}, degree=n, rho=rho)
    return GeneratingFunction(compose(s, a, b) * factor)
