"""Twist maps generated by symmetric generating functions.

``F(x, -s(y, x)) = (y, s(x, y))``; the inverse is ``T F T`` with
``T(x, u) = (x, -u)``.  Presentation functions ``Psi_0 = Lambda`` and
``Psi_1 = F o Lambda`` build the periodic orbits of the renormalization
fixed point without long iteration of ``F``.

Two precision modes are offered: ``"double"`` runs compiled kernels,
``"extended"`` runs the same algorithms in interpreted ``np.longdouble``
arithmetic (80-bit on x86) and is much slower.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _dyn
from .errors import ConfigurationError, ConvergenceError, DegenerateError, DomainEscapeError
from .operator import GeneratingFunction, ScalingPair, _as_series, renormalize

PRECISIONS = ("double", "extended")
TRIM_RADIUS = 1.25
TRIM_TOL = 1e-19
FIXED_POINT_BRACKET = (0.5, 0.65)


class MapPoint(NamedTuple):
    x: float
    u: float


def _raise_status(st, where):
    if st == _dyn.TWIST:
        raise DegenerateError(f"{where}: twist condition fails (d1 s(y, x) = 0)")
    if st == _dyn.NOSOLVE:
        raise ConvergenceError(f"{where}: implicit equation u = -s(y, x) has no solution near the seed")
    if st == _dyn.ESCAPE:
        raise DomainEscapeError(f"{where}: point left the evaluation disk")
    if st != _dyn.OK:
        raise ConvergenceError(f"{where}: status {st}")


def effective_degree(s, radius=TRIM_RADIUS, tol=TRIM_TOL):
    """Smallest degree whose dropped tail weighs at most ``tol * ||s||`` at ``radius``."""
    c = np.abs(s.coeffs)
    n = s.degree
    i, j = np.indices(c.shape)
    deg = i + j
    by_deg = np.bincount(deg.ravel(), weights=(c * float(radius) ** deg).ravel(), minlength=2 * n + 1)[: n + 1]
    tail = np.cumsum(by_deg[::-1])[::-1]  # tail[d] = weight of degrees >= d
    budget = tol * max(s.norm(radius), 1e-300)
    for d in range(n + 1):
        if d == n or tail[d + 1] <= budget:
            return d
    return n


class TwistMap:
    """The map generated by ``gen`` on the real trace of the bidisk."""

    def __init__(self, gen, eval_radius=None, scalings=None, precision="double", trim=True):
        if precision not in PRECISIONS:
            raise ConfigurationError(f"precision must be one of {PRECISIONS}")
        s = _as_series(gen)
        self.gen = gen if isinstance(gen, GeneratingFunction) else GeneratingFunction(s)
        self.eval_radius = float(s.rho if eval_radius is None else eval_radius)
        self.precision = precision
        d = effective_degree(s) if trim else s.degree
        self.n = d
        self.coeffs = np.ascontiguousarray(s.coeffs[: d + 1, : d + 1])
        self._scalings = scalings

    @property
    def scalings(self):
        if self._scalings is None:
            self._scalings = renormalize(self.gen, check=False)[1]
        return self._scalings

    # single steps ---------------------------------------------------------------
    def _step(self, p, inverse, seed):
        x, u = p
        y0 = x if seed is None else seed
        if self.precision == "extended":
            return _ext_step(self.coeffs, self.n, x, u, y0, inverse, self.eval_radius)
        out = np.empty(6)
        st = _dyn.step(self.coeffs, self.n, float(x), float(u), float(y0), inverse, self.eval_radius, out)
        _raise_status(st, "inverse map" if inverse else "map")
        return out

    def apply(self, p, seed=None):
        out = self._step(p, False, seed)
        return MapPoint(out[0], out[1])

    def apply_inverse(self, p, seed=None):
        out = self._step(p, True, seed)
        return MapPoint(out[0], out[1])

    def apply_with_jacobian(self, p, seed=None, inverse=False):
        out = self._step(p, inverse, seed)
        return MapPoint(out[0], out[1]), np.array([[out[2], out[3]], [out[4], out[5]]])

    def jacobian(self, p, seed=None):
        J = self.apply_with_jacobian(p, seed)[1]
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det - 1.0) > 1e-11 * max(1.0, float(np.abs(J).max()) ** 2):
            raise DegenerateError(f"Jacobian determinant {det!r} is not 1")
        return J


def apply_map(m, p, seed=None):
    return m.apply(p, seed)


def apply_inverse(m, p, seed=None):
    return m.apply_inverse(p, seed)


def jacobian(m, p, seed=None):
    return m.jacobian(p, seed)


def reflect(p):
    """``T(x, u) = (x, -u)``."""
    return MapPoint(p[0], -p[1])


@dataclass(frozen=True)
class FixedPointEigen:
    e_plus: float
    e_minus: float
    unstable: np.ndarray
    stable: np.ndarray
    jacobian: np.ndarray
    residual: float


def hyperbolic_fixed_point(m, bracket=FIXED_POINT_BRACKET):
    """Fixed point on the symmetry line: the root of ``s(x, x)``.

    Eigenvectors are scaled to first component 1; ``e_plus`` is the
    expanding eigenvalue.
    """
    from ._kernels import tri_eval_grad

    c, n = m.coeffs, m.n

    def g(x):
        v, a, b = tri_eval_grad(c, n, x, x)
        return v, a + b

    lo, hi = bracket
    if g(lo)[0] * g(hi)[0] > 0:
        raise ConvergenceError(f"s(x, x) has no root in {bracket}")
    x = 0.5 * (lo + hi)
    for _ in range(60):
        v, d = g(x)
        if d == 0.0:
            raise DegenerateError("s(x, x) has a critical point")
        dx = v / d
        x -= dx
        if abs(dx) <= 1e-16 * abs(x):
            break
    if not lo <= x <= hi:
        raise ConvergenceError("Newton for s(x, x) left the bracket")
    p = MapPoint(x, 0.0)
    img, J = m.apply_with_jacobian(p)
    J = np.asarray(J, float)
    residual = float(np.hypot(float(img[0] - p[0]), float(img[1] - p[1])))
    w, V = np.linalg.eig(J)
    if np.any(np.abs(w.imag) > 0):
        raise DegenerateError("fixed point is not hyperbolic")
    w = w.real
    V = V.real / V.real[0]
    k = int(np.argmax(np.abs(w)))
    return p, FixedPointEigen(w[k], w[1 - k], V[:, k].copy(), V[:, 1 - k].copy(), J, residual)


# dyadic words ---------------------------------------------------------------------
@dataclass(frozen=True)
class DyadicWord:
    """Finite binary word; ``bits[0]`` is the least significant digit."""

    bits: tuple

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ConfigurationError("dyadic words hold only 0 and 1")

    @classmethod
    def from_int(cls, k, n):
        if not 0 <= k < 1 << n:
            raise ConfigurationError(f"{k} does not fit in {n} bits")
        return cls(tuple((k >> i) & 1 for i in range(n)))

    @classmethod
    def parse(cls, text):
        return cls(tuple(int(ch) for ch in text))

    @property
    def n(self):
        return len(self.bits)

    @property
    def k(self):
        return sum(b << i for i, b in enumerate(self.bits))

    def __str__(self):
        return "".join(map(str, self.bits))

    def array(self):
        return np.array(self.bits if self.bits else (0,), np.int8)


def odometer(w):
    """Add one with carry, least significant digit first."""
    return DyadicWord.from_int((w.k + 1) % (1 << w.n), w.n) if w.n else w


def all_words(n):
    return [DyadicWord.from_int(k, n) for k in range(1 << n)]


# presentation functions -------------------------------------------------------
class Family:
    """Level-indexed maps with their scalings; a single level repeats."""

    def __init__(self, maps, scalings=None):
        self.maps = list(maps)
        if not self.maps:
            raise ConfigurationError("empty family")
        if scalings is None:
            scalings = [m.scalings for m in self.maps]
        self.scalings = [s if isinstance(s, ScalingPair) else ScalingPair(*s) for s in scalings]
        n = max(m.n for m in self.maps)
        self.n = n
        self.C = np.zeros((len(self.maps), n + 1, n + 1))
        for k, m in enumerate(self.maps):
            self.C[k, : m.n + 1, : m.n + 1] = m.coeffs
        self.lam = np.array([s.lam for s in self.scalings])
        self.mu = np.array([s.mu for s in self.scalings])
        self.radius = min(m.eval_radius for m in self.maps)
        self.precision = self.maps[0].precision

    def __len__(self):
        return len(self.maps)

    @property
    def repeating(self):
        return len(self.maps) == 1

    def check_depth(self, n):
        if not self.repeating and len(self) < n:
            raise ConfigurationError(f"family has {len(self)} levels, word needs {n}")

    def level(self, k):
        return 0 if self.repeating else k


def presentation(family, w, base):
    """``Psi_w(base)`` and its derivative (outermost map uses ``w.bits[0]``)."""
    if not isinstance(family, Family):
        family = Family([m for m, _ in family], [sc for _, sc in family])
    family.check_depth(w.n)
    if family.precision == "extended":
        return _ext_psi_forward(family, w.bits, base)
    nb = w.n
    seeds = np.full(max(nb, 1), np.nan)
    rec_a = np.full(max(nb, 1), np.nan)
    rec_b = np.full(max(nb, 1), np.nan)
    J = np.empty((2, 2))
    x, u, st = _dyn.psi_forward(
        family.C, family.n, family.lam, family.mu, w.array(), nb, float(base[0]), float(base[1]),
        seeds, rec_a, rec_b, J, family.radius,
    )
    _raise_status(st, f"presentation of {w}")
    return MapPoint(x, u), J


def presentation_inverse(family, w, p):
    """``Psi_w^{-1}(p)`` and the derivative of the inverse chain at ``p``."""
    family.check_depth(w.n)
    if family.precision == "extended":
        return _ext_psi_inverse(family, w.bits, p)
    nb = w.n
    J = np.empty((2, 2))
    x, u, st = _dyn.psi_inverse(
        family.C, family.n, family.lam, family.mu, w.array(), nb, float(p[0]), float(p[1]),
        np.full(max(nb, 1), np.nan), J, family.radius,
    )
    _raise_status(st, f"inverse presentation of {w}")
    return MapPoint(x, u), J


def fixed_point_family(fp, precision="double"):
    m = TwistMap(fp.s_star, precision=precision, scalings=ScalingPair(fp.lam, fp.mu))
    return Family([m])


@dataclass(frozen=True)
class PeriodicOrbit:
    n: int
    points: np.ndarray  # (2**n, 2), row k is p_w with k(w) = k
    chains: np.ndarray  # (2**n, 2, 2)
    base: MapPoint
    eigen: FixedPointEigen
    scalings: ScalingPair

    def __len__(self):
        return self.points.shape[0]

    def point(self, w):
        return MapPoint(*self.points[w.k])

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "k", "bits", "x", "u"])
        for k in range(len(self)):
            wr.writerow([self.n, k, str(DyadicWord.from_int(k, self.n)), repr(float(self.points[k, 0])), repr(float(self.points[k, 1]))])
        return buf.getvalue()


def periodic_orbit(fp, n, precision="double", max_level=16, check=None):
    """The ``2**n`` points ``Psi_w(p*)`` with their chain derivatives."""
    if not 0 <= n <= max_level:
        raise ConfigurationError(f"orbit level must be in 0..{max_level}")
    fam = fixed_point_family(fp, precision)
    m = fam.maps[0]
    base, eig = hyperbolic_fixed_point(m)
    count = 1 << n
    if precision == "extended":
        pts = np.empty((count, 2))
        jac = np.empty((count, 2, 2))
        for k in range(count):
            p, J = _ext_psi_forward(fam, DyadicWord.from_int(k, n).bits, base)
            pts[k] = p
            jac[k] = J
    else:
        pts = np.empty((count, 2))
        jac = np.empty((count, 2, 2))
        status = np.zeros(count, np.int64)
        _dyn.orbit_points(fam.C, fam.n, fam.lam, fam.mu, n, base.x, base.u, fam.radius, pts, jac, status)
        bad = np.flatnonzero(status)
        if bad.size:
            _raise_status(int(status[bad[0]]), f"orbit word {DyadicWord.from_int(int(bad[0]), n)}")
    orbit = PeriodicOrbit(n, pts, jac, base, eig, ScalingPair(fp.lam, fp.mu))
    if check is None:
        check = n <= 12
    if check:
        check_orbit(orbit, m)
    return orbit


def check_orbit(orbit, m, orbit_tol=1e-9):
    """Assert the odometer relation and the determinant of every chain."""
    n = orbit.n
    lam, mu = orbit.scalings.lam, orbit.scalings.mu
    pts = orbit.points
    scale = max(float(np.abs(pts).max()), 1e-300)
    for k in range(len(orbit)):
        img = m.apply(pts[k])
        nxt = pts[(k + 1) % len(orbit)]
        if np.hypot(img[0] - nxt[0], img[1] - nxt[1]) > orbit_tol * scale:
            raise ConvergenceError(f"orbit point {k} does not map to its successor")
    dets = np.linalg.det(orbit.chains)
    target = (lam * mu) ** n
    if np.max(np.abs(dets - target)) > 1e-9 * abs(target):
        raise ConvergenceError("chain determinants differ from (lam mu)^n")
    return True


# extended-precision interpreted path ---------------------------------------------
def _ext_grad(c, n, x, y):
    v = vx = vy = np.longdouble(0)
    for i in range(n, -1, -1):
        row = drow = np.longdouble(0)
        for j in range(n - i, -1, -1):
            drow = drow * y + row
            row = row * y + c[i, j]
        vx = vx * x + v
        v = v * x + row
        vy = vy * x + drow
    return v, vx, vy


def _ext_step(coeffs, n, x, u, y0, inverse, radius):
    c = coeffs.astype(np.longdouble)
    x = np.longdouble(x)
    u = np.longdouble(u)
    w = u if inverse else -u
    y = np.longdouble(y0)
    tiny = np.finfo(np.longdouble).eps
    prev = np.inf
    for it in range(60):
        v, s1, _ = _ext_grad(c, n, y, x)
        if s1 == 0:
            raise DegenerateError("twist condition fails")
        dy = (v - w) / s1
        y -= dy
        if abs(dy) <= 2 * tiny * max(abs(y), np.longdouble(1e-300)):
            break
        # rounding floor reached: the correction stopped shrinking
        if it >= 3 and abs(dy) >= prev and abs(dy) <= 1e-14 * max(abs(y), 1.0):
            break
        prev = abs(dy)
    else:
        raise ConvergenceError("extended Newton did not converge")
    if abs(y) > radius or abs(x) > radius:
        raise DomainEscapeError("point left the evaluation disk")
    v, s1xy, s2xy = _ext_grad(c, n, x, y)
    _, s1yx, s2yx = _ext_grad(c, n, y, x)
    yx = -s2yx / s1yx
    if inverse:
        yu = 1 / s1yx
        return [y, -v, yx, yu, -(s1xy + s2xy * yx), -s2xy * yu]
    yu = -1 / s1yx
    return [y, v, yx, yu, s1xy + s2xy * yx, s2xy * yu]


def _ext_psi_forward(family, bits, base):
    x, u = np.longdouble(base[0]), np.longdouble(base[1])
    J = np.eye(2, dtype=np.longdouble)
    for k in range(len(bits) - 1, -1, -1):
        lv = family.level(k)
        lam, mu = np.longdouble(family.lam[lv]), np.longdouble(family.mu[lv])
        x, u = lam * x, mu * u
        J = np.array([[lam, 0], [0, mu]], dtype=np.longdouble) @ J
        if bits[k]:
            m = family.maps[lv]
            out = _ext_step(m.coeffs, m.n, x, u, x, False, family.radius)
            x, u = out[0], out[1]
            J = np.array([[out[2], out[3]], [out[4], out[5]]], dtype=np.longdouble) @ J
    return MapPoint(x, u), J


def _ext_psi_inverse(family, bits, p):
    x, u = np.longdouble(p[0]), np.longdouble(p[1])
    J = np.eye(2, dtype=np.longdouble)
    for k in range(len(bits)):
        lv = family.level(k)
        if bits[k]:
            m = family.maps[lv]
            out = _ext_step(m.coeffs, m.n, x, u, x, True, family.radius)
            x, u = out[0], out[1]
            J = np.array([[out[2], out[3]], [out[4], out[5]]], dtype=np.longdouble) @ J
        lam, mu = np.longdouble(family.lam[lv]), np.longdouble(family.mu[lv])
        x, u = x / lam, u / mu
        J = np.array([[1 / lam, 0], [0, 1 / mu]], dtype=np.longdouble) @ J
    return MapPoint(x, u), J
