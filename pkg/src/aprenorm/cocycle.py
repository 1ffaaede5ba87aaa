"""Invariant direction fields and the normalized derivative cocycle.

On the period-``2**n`` orbit of the fixed-point map the stable and unstable
directions of the deepest fixed point are transported by the presentation
chains.  Their angle distribution gives a histogram measure on the circle,
and Birkhoff averages of the cocycle ``v -> DF v / |DF v|`` along the orbit
of the origin are compared against it.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import _dyn
from .dynamics import TwistMap, _raise_status, fixed_point_family, periodic_orbit
from .errors import ConfigurationError, DegenerateError
from .operator import ScalingPair

TEST_FUNCTIONS = {
    "one": lambda a: np.ones_like(a),
    "sin2": lambda a: np.sin(a) ** 2,
    "cos2": lambda a: np.cos(a) ** 2,
    "cos4": lambda a: np.cos(a) ** 4,
}
TWO_PI = 2.0 * np.pi


def _angles(vx, vu):
    a = np.arctan2(vu, vx)
    return np.where(a < 0, a + TWO_PI, a)


def test_function(f):
    if callable(f):
        return f
    try:
        return TEST_FUNCTIONS[f]
    except KeyError:
        raise ConfigurationError(f"unknown test function {f!r}; choose from {sorted(TEST_FUNCTIONS)}") from None


def direction_field(orbit, which="stable"):
    """Angles in ``[0, 2 pi)`` of ``DPsi_w(p*) e`` for every orbit point."""
    if which not in ("stable", "unstable"):
        raise ConfigurationError("which must be 'stable' or 'unstable'")
    e = orbit.eigen.stable if which == "stable" else orbit.eigen.unstable
    v = orbit.chains @ e
    if np.any(np.hypot(v[:, 0], v[:, 1]) == 0):
        raise DegenerateError("a transported direction vanished")
    return _angles(v[:, 0], v[:, 1])


@dataclass(frozen=True)
class AngleHistogram:
    n: int
    bins: int
    counts: np.ndarray  # relative frequencies
    which: str

    @property
    def edges(self):
        return TWO_PI * np.arange(self.bins + 1) / self.bins

    @property
    def centers(self):
        return TWO_PI * (np.arange(self.bins) + 0.5) / self.bins

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["center", "K"])
        for c, k in zip(self.centers, self.counts):
            w.writerow([repr(float(c)), repr(float(k))])
        return buf.getvalue()


def angle_histogram(angles, bins, n=-1, which="stable"):
    a = np.asarray(angles, float)
    idx = np.minimum((a * (bins / TWO_PI)).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(float)
    return AngleHistogram(n, int(bins), counts / counts.sum(), which)


def peak_angles(hist, count=2):
    """Locations of the ``count`` heaviest peaks.

    Peaks are scored on windows of two neighbouring bins (cyclically) so a
    peak split by a bin edge is reported at that edge; chosen windows do not
    overlap.
    """
    K = hist.counts
    pair = K + np.roll(K, -1)  # window i covers bins i and i+1
    taken = np.zeros(hist.bins, bool)
    out = []
    for i in np.argsort(pair, kind="stable")[::-1]:
        j = (i + 1) % hist.bins
        if taken[i] or taken[j]:
            continue
        taken[i] = taken[j] = True
        out.append(float(TWO_PI * ((i + 1) % hist.bins) / hist.bins))
        if len(out) == count:
            break
    return out


def orbit_histogram(fp, n, bins, which="stable", orbit=None):
    orbit = periodic_orbit(fp, n, check=False) if orbit is None else orbit
    return angle_histogram(direction_field(orbit, which), bins, n, which)


def measure_average(hist, f):
    """Midpoint rule of ``f`` against the relative counts."""
    return float(np.dot(test_function(f)(hist.centers), hist.counts))


# cocycle along the orbit of the origin -------------------------------------------
@dataclass(frozen=True)
class CocycleRun:
    angles: np.ndarray  # angle of A_k v for k = 0..M-1
    log_growth: float  # log |DF^M v|
    M: int


def _unit(v):
    v = np.asarray(v, float)
    r = math.hypot(v[0], v[1])
    if r == 0:
        raise ConfigurationError("initial vector must be nonzero")
    return v / r


METHODS = ("presentation", "iterate")


def cocycle_run(fp, M, v=(1.0, 0.0), x0=(0.0, 0.0), method="presentation"):
    """Angles of ``A_k v`` for ``k < M`` along the orbit of ``x0`` under ``F*``.

    ``method="presentation"`` (origin only) reads the orbit off its coding:
    the origin is fixed by ``Lambda*`` and ``F*^k(0) = Psi_w(0)`` with ``w``
    the binary digits of ``k``, so ``DF*^k(0) = DPsi_w(0) Lambda*^-m``.  This
    only multiplies contractions and keeps full accuracy.
    ``method="iterate"`` steps ``F*`` and ``DF*`` directly; in double
    precision the tangent direction drifts after a few thousand steps.
    """
    if M < 1:
        raise ConfigurationError("M must be positive")
    if method not in METHODS:
        raise ConfigurationError(f"method must be one of {METHODS}")
    v = _unit(v)
    if method == "iterate":
        m = TwistMap(fp.s_star, scalings=ScalingPair(fp.lam, fp.mu))
        angles = np.empty(M)
        lg = np.zeros(1)
        done, st = _dyn.cocycle_run(m.coeffs, m.n, float(x0[0]), float(x0[1]), v[0], v[1], M, m.eval_radius, angles, lg)
        if st != 0:
            _raise_status(st, f"cocycle orbit step {done}")
        return CocycleRun(angles, float(lg[0]), M)
    if tuple(map(float, x0)) != (0.0, 0.0):
        raise ConfigurationError("the presentation method starts at the origin")
    m_bits = max(1, int(M).bit_length())
    fam = fixed_point_family(fp)
    count = 1 << m_bits
    pts = np.empty((count, 2))
    jac = np.empty((count, 2, 2))
    status = np.zeros(count, np.int64)
    _dyn.orbit_points(fam.C, fam.n, fam.lam, fam.mu, m_bits, 0.0, 0.0, fam.radius, pts, jac, status)
    if status.any():
        _raise_status(int(status[np.flatnonzero(status)[0]]), "presentation orbit of the origin")
    # mu**m Lambda**-m v keeps the direction of Lambda**-m v since mu > 0
    w = np.array([v[0] * (fp.mu / fp.lam) ** m_bits, v[1]])
    wn = math.hypot(w[0], w[1])
    w = w / wn
    img = jac[: M + 1] @ w
    angles = _angles(img[:M, 0], img[:M, 1])
    log_growth = math.log(math.hypot(*img[M])) + math.log(wn) - m_bits * math.log(fp.mu)
    return CocycleRun(angles, log_growth, M)


def birkhoff_average(fp, f, M, v=(1.0, 0.0), x0=(0.0, 0.0), run=None, method="presentation"):
    run = cocycle_run(fp, M, v, x0, method) if run is None else run
    return float(np.mean(test_function(f)(run.angles[:M])))


def lyapunov_estimate(fp, M, v=(1.0, 0.0), run=None, method="presentation"):
    run = cocycle_run(fp, M, v, method=method) if run is None else run
    return run.log_growth / run.M


@dataclass(frozen=True)
class CocycleReport:
    f: str
    M: int
    v: tuple
    n: int
    N: int
    L: float
    R: float

    @property
    def rel_diff(self):
        return abs(2.0 * (self.L - self.R) / (self.L + self.R))


def ergodic_compare(fp, f, M, v, n, N_bins, which="stable", run=None, hist=None):
    L = birkhoff_average(fp, f, M, v, run=run)
    hist = orbit_histogram(fp, n, N_bins, which) if hist is None else hist
    R = measure_average(hist, f)
    if L + R == 0:
        raise DegenerateError("L + R vanishes")
    name = f if isinstance(f, str) else getattr(f, "__name__", "f")
    return CocycleReport(name, M, tuple(map(float, v)), n, N_bins, L, R)


def ergodic_tables(fp, functions=("sin2", "cos4"), vectors=((1.0, 0.0), (0.0, 1.0)), levels=(12, 14, 16),
                   bins=(1000, 5000, 15000), M=20000, which="stable", method="presentation"):
    """``{(f, v): {(n, N): CocycleReport}}``; orbits and runs are shared."""
    runs = {v: cocycle_run(fp, M, v, method=method) for v in vectors}
    fields = {n: direction_field(periodic_orbit(fp, n, check=False), which) for n in levels}
    hists = {(n, N): angle_histogram(fields[n], N, n, which) for n in levels for N in bins}
    out = {}
    for f in functions:
        for v in vectors:
            out[(f, v)] = {
                key: ergodic_compare(fp, f, M, v, key[0], key[1], which, run=runs[v], hist=h)
                for key, h in hists.items()
            }
    return out


def tables_csv(tables):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f", "vx", "vu", "n", "N", "L", "R", "rel_diff"])
    for (f, v), table in tables.items():
        for (n, N), rep in sorted(table.items()):
            w.writerow([f, v[0], v[1], n, N, repr(rep.L), repr(rep.R), repr(rep.rel_diff)])
    return buf.getvalue()

