"""Truncated bivariate Taylor series with the weighted l1 norm.

A :class:`Series2` holds the coefficients ``c[i, j]`` of ``x**i y**j`` for
``i + j <= degree`` together with the radius ``rho`` of the bidisk on which
the norm ``sum |c_ij| rho**(i+j)`` is taken.  Values are immutable; every
operation returns a new series.

The symmetric subspace consists of series whose first partial satisfies
``d1 s(x, y) = d1 s(y, x)``; these are exactly the generating functions of
area-preserving maps.  The normalized basis ``psi_{i,j}`` of that subspace
and its single-index enumeration live at the bottom of this module.
"""
from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import CompositionError, ConfigurationError, OutsideDiskWarning

DEFAULT_RHO = 1.75
DEFAULT_DEGREE = 40
SYMMETRY_TOL = 1e-9


@lru_cache(maxsize=None)
def _mask(n):
    idx = np.arange(n + 1)
    m = np.add.outer(idx, idx) <= n
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def _weights(n, rho):
    idx = np.arange(n + 1)
    w = np.where(_mask(n), float(rho) ** np.add.outer(idx, idx), 0.0)
    w.setflags(write=False)
    return w


class Series2:
    """Truncated real power series in two variables."""

    __slots__ = ("_c", "_n", "_rho")

    def __init__(self, coeffs, rho=DEFAULT_RHO, degree=None):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 2:
            raise ConfigurationError("coefficient array must be two-dimensional")
        if degree is None:
            degree = max(c.shape) - 1
        n = int(degree)
        if n < 0:
            raise ConfigurationError("degree must be non-negative")
        if rho <= 0:
            raise ConfigurationError("rho must be positive")
        full = np.zeros((n + 1, n + 1))
        r, k = min(c.shape[0], n + 1), min(c.shape[1], n + 1)
        full[:r, :k] = c[:r, :k]
        full[~_mask(n)] = 0.0
        full.setflags(write=False)
        self._c = full
        self._n = n
        self._rho = float(rho)

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, degree=DEFAULT_DEGREE, rho=DEFAULT_RHO):
        return cls(np.zeros((degree + 1, degree + 1)), rho, degree)

    @classmethod
    def constant(cls, value, degree=DEFAULT_DEGREE, rho=DEFAULT_RHO):
        c = np.zeros((degree + 1, degree + 1))
        c[0, 0] = value
        return cls(c, rho, degree)

    @classmethod
    def monomial(cls, i, j, degree=DEFAULT_DEGREE, rho=DEFAULT_RHO, coeff=1.0):
        c = np.zeros((degree + 1, degree + 1))
        if i + j <= degree:
            c[i, j] = coeff
        return cls(c, rho, degree)

    @classmethod
    def from_terms(cls, terms, degree=DEFAULT_DEGREE, rho=DEFAULT_RHO):
        """Build from a mapping ``{(i, j): c_ij}``."""
        c = np.zeros((degree + 1, degree + 1))
        for (i, j), v in terms.items():
            if i < 0 or j < 0:
                raise ConfigurationError(f"negative exponent ({i}, {j})")
            if i + j <= degree:
                c[i, j] += v
        return cls(c, rho, degree)

    @classmethod
    def _wrap(cls, c, rho, n):
        obj = cls.__new__(cls)
        c = np.where(_mask(n), c, 0.0)
        c.setflags(write=False)
        obj._c = c
        obj._n = n
        obj._rho = rho
        return obj

    # accessors -------------------------------------------------------------
    @property
    def coeffs(self):
        return self._c

    @property
    def degree(self):
        return self._n

    @property
    def rho(self):
        return self._rho

    def __getitem__(self, ij):
        i, j = ij
        if i < 0 or j < 0 or i + j > self._n:
            return 0.0
        return float(self._c[i, j])

    def terms(self):
        """Nonzero coefficients as ``(i, j, c)`` in i-then-j order."""
        ii, jj = np.nonzero(self._c)
        return [(int(i), int(j), float(self._c[i, j])) for i, j in zip(ii, jj)]

    def __repr__(self):
        return f"Series2(degree={self._n}, rho={self._rho}, nnz={np.count_nonzero(self._c)})"

    # norm -------------------------------------------------------------------
    def norm(self, rho=None):
        rho = self._rho if rho is None else float(rho)
        return float(np.sum(np.abs(self._c) * _weights(self._n, rho)))

    # arithmetic -------------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, Series2):
            raise TypeError(f"expected Series2, got {type(other).__name__}")
        if other._rho != self._rho:
            raise ConfigurationError(f"mismatched radii {self._rho} and {other._rho}")
        return min(self._n, other._n)

    def __add__(self, other):
        if isinstance(other, (int, float, np.floating)):
            c = self._c.copy()
            c[0, 0] += other
            return Series2._wrap(c, self._rho, self._n)
        n = self._check(other)
        return Series2._wrap(self._c[: n + 1, : n + 1] + other._c[: n + 1, : n + 1], self._rho, n)

    __radd__ = __add__

    def __neg__(self):
        return Series2._wrap(-self._c, self._rho, self._n)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return Series2._wrap(self._c * float(other), self._rho, self._n)
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return Series2._wrap(self._c / float(other), self._rho, self._n)
        return multiply(self, other.reciprocal())

    def reciprocal(self):
        """Series of ``1 / s``; needs a nonzero constant term."""
        if self._c[0, 0] == 0.0:
            raise ZeroDivisionError("series with zero constant term has no reciprocal")
        return Series2._wrap(_kernels.tri_reciprocal(self._c, self._n), self._rho, self._n)

    def truncate(self, degree):
        degree = min(int(degree), self._n)
        return Series2._wrap(self._c[: degree + 1, : degree + 1].copy(), self._rho, degree)

    def extend(self, degree):
        """Same polynomial stored with a larger degree cap (zero padded)."""
        if degree <= self._n:
            return self.truncate(degree)
        c = np.zeros((degree + 1, degree + 1))
        c[: self._n + 1, : self._n + 1] = self._c
        return Series2._wrap(c, self._rho, degree)

    def with_rho(self, rho):
        return Series2._wrap(self._c.copy(), float(rho), self._n)

    def swap(self):
        """The series of ``s(y, x)``."""
        return Series2._wrap(self._c.T.copy(), self._rho, self._n)

    def scale(self, a, b):
        """The series of ``s(a x, b y)``."""
        idx = np.arange(self._n + 1)
        return Series2._wrap(self._c * np.outer(float(a) ** idx, float(b) ** idx), self._rho, self._n)

    def partial(self, axis):
        return partial(self, axis)

    def __call__(self, x, y):
        return eval_series(self, x, y)

    def symmetry_residual(self):
        """Largest violation of ``(i+1) c[i+1, j] == (j+1) c[j+1, i]``."""
        d1 = self._c[1:, :-1] * np.arange(1, self._n + 1)[:, None]
        m = _mask(self._n - 1) if self._n >= 1 else np.zeros((0, 0), bool)
        if d1.size == 0:
            return 0.0
        return float(np.max(np.abs(np.where(m, d1 - d1.T, 0.0)), initial=0.0))

    def is_symmetric(self, tol=SYMMETRY_TOL):
        return self.symmetry_residual() <= tol * max(1.0, self.norm())

    def allclose(self, other, tol=1e-12):
        return (self - other).norm() <= tol


class SymSeries2(Series2):
    """A :class:`Series2` known to lie in the symmetric subspace."""

    __slots__ = ()

    def __init__(self, coeffs, rho=DEFAULT_RHO, degree=None, tol=SYMMETRY_TOL):
        super().__init__(coeffs, rho, degree)
        res = self.symmetry_residual()
        if res > tol * max(1.0, self.norm()):
            raise ConfigurationError(f"series is not symmetric (residual {res:.3e})")

    @classmethod
    def from_series(cls, s, tol=SYMMETRY_TOL):
        return cls(s.coeffs, s.rho, s.degree, tol=tol)


def norm_rho(s, rho=None):
    return s.norm(rho)


def multiply(s, t):
    """Cauchy product truncated at the smaller degree cap."""
    n = s._check(t)
    c = _kernels.tri_mul(
        np.ascontiguousarray(s.coeffs[: n + 1, : n + 1]),
        np.ascontiguousarray(t.coeffs[: n + 1, : n + 1]),
        n,
    )
    return Series2._wrap(c, s.rho, n)


def partial(s, axis):
    """Formal partial derivative; the degree cap drops by one."""
    n = s.degree
    if n == 0:
        return Series2.zero(0, s.rho)
    c = s.coeffs
    if axis == 1:
        d = c[1:, :-1] * np.arange(1, n + 1)[:, None]
    elif axis == 2:
        d = c[:-1, 1:] * np.arange(1, n + 1)[None, :]
    else:
        raise ConfigurationError(f"axis must be 1 or 2, got {axis}")
    return Series2._wrap(np.ascontiguousarray(d), s.rho, n - 1)


def eval_series(s, x, y, radius=None):
    """Horner evaluation at a real point (or arrays of points)."""
    if radius is not None and (np.max(np.abs(x)) > radius or np.max(np.abs(y)) > radius):
        warnings.warn(f"evaluation at ({x}, {y}) outside radius {radius}", OutsideDiskWarning, stacklevel=2)
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return _kernels.tri_eval(s.coeffs, s.degree, float(x), float(y))
    xs, ys = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    v, _, _ = _kernels.tri_eval_grad_many(s.coeffs, s.degree, xs.ravel(), ys.ravel())
    return v.reshape(xs.shape)


def eval_grad(s, x, y):
    """``(s, d1 s, d2 s)`` at a real point."""
    return _kernels.tri_eval_grad(s.coeffs, s.degree, float(x), float(y))


def powers(a, count):
    """``[1, a, a**2, ..., a**count]`` as series at a's degree cap."""
    out = [Series2.constant(1.0, a.degree, a.rho), a]
    for _ in range(2, count + 1):
        out.append(multiply(out[-1], a))
    return out[: count + 1]


def compose(s, a, b, bound=1e12):
    """Taylor coefficients of ``s(a(x, y), b(x, y))`` up to the common cap.

    Horner in ``a`` over rows ``P_i(b) = sum_j c_ij b**j``.  If the running
    Horner accumulator grows past ``bound`` the substitution is outside the
    disk where ``s`` converges and :class:`CompositionError` is raised.
    """
    if a.rho != s.rho or b.rho != s.rho:
        raise ConfigurationError("mismatched radii in composition")
    n = min(a.degree, b.degree)
    a = a.truncate(n)
    b = b.truncate(n)
    m = s.degree
    bp = np.stack([p.coeffs for p in powers(b, m)])  # (m+1, n+1, n+1)
    rows = np.tensordot(s.coeffs, bp, axes=([1], [0]))  # rows[i] = P_i(b)
    acc = np.array(rows[m])
    scale = max(1.0, s.norm())
    for i in range(m - 1, -1, -1):
        acc = _kernels.tri_mul(acc, a.coeffs, n) + rows[i]
        if not np.all(np.isfinite(acc)) or np.sum(np.abs(acc) * _weights(n, s.rho)) > bound * scale:
            raise CompositionError("composition outside disk: Horner accumulator diverged")
    return Series2._wrap(acc, s.rho, n)


def identity_x(degree=DEFAULT_DEGREE, rho=DEFAULT_RHO):
    return Series2.monomial(1, 0, degree, rho)


def identity_y(degree=DEFAULT_DEGREE, rho=DEFAULT_RHO):
    return Series2.monomial(0, 1, degree, rho)


# text serialization ---------------------------------------------------------
def dumps(s):
    lines = [f"degree={s.degree} rho={s.rho!r}"]
    for i, j, c in s.terms():
        lines.append(f"{i} {j} {c:.17g}")
    return "\n".join(lines) + "\n"


def loads(text):
    it = iter(line.strip() for line in text.splitlines())
    header = next(it)
    fields = dict(kv.split("=", 1) for kv in header.split())
    try:
        degree = int(fields["degree"])
        rho = float(fields["rho"])
    except KeyError as exc:
        raise ConfigurationError(f"bad series header {header!r}") from exc
    c = np.zeros((degree + 1, degree + 1))
    for line in it:
        if not line or "=" in line:
            continue
        i, j, v = line.split()
        c[int(i), int(j)] = float(v)
    return Series2(c, rho, degree)


# symmetric basis ------------------------------------------------------------
def index_set(N):
    """Pairs of ``I_N`` in single-index order (k = 1, 2, ...)."""
    pairs = [(-1, j) for j in range(N + 1)]
    for i in range(0, N):
        for j in range(i, N - i):
            pairs.append((i, j))
    return pairs


@lru_cache(maxsize=None)
def _index_table(N):
    pairs = tuple(index_set(N))
    return pairs, {p: k + 1 for k, p in enumerate(pairs)}


def dimension(N):
    """``D(N)``, the number of basis elements with ``i + j < N``."""
    return len(_index_table(N)[0])


def _check_pair(i, j):
    if i < -1 or j < max(0, i):
        raise ConfigurationError(f"({i}, {j}) is not a basis index")


def index_map(i, j, N):
    _check_pair(i, j)
    try:
        return _index_table(N)[1][(i, j)]
    except KeyError:
        raise ConfigurationError(f"({i}, {j}) is outside I_{N}") from None


def inverse_index(k, N):
    pairs = _index_table(N)[0]
    if not 1 <= k <= len(pairs):
        raise ConfigurationError(f"k={k} outside 1..{len(pairs)}")
    return pairs[k - 1]


def basis_raw_norm(i, j, rho=DEFAULT_RHO):
    """``||psi~_{i,j}||_rho``."""
    _check_pair(i, j)
    if i == -1:
        return rho**j
    if i == j:
        return 2.0 * rho ** (2 * i + 1)
    return rho ** (i + j + 1) * (1.0 + (i + 1) / (j + 1))


def _basis_terms(i, j):
    if i == -1:
        return [((0, j), 1.0)]
    return [((i + 1, j), 1.0), ((j + 1, i), (i + 1) / (j + 1))]


def basis_vector(i, j, rho=DEFAULT_RHO, degree=DEFAULT_DEGREE, normalized=True):
    _check_pair(i, j)
    top = j if i == -1 else i + j + 1
    if top > degree:
        raise ConfigurationError(f"psi_({i},{j}) does not fit in degree {degree}")
    c = np.zeros((degree + 1, degree + 1))
    for (a, b), v in _basis_terms(i, j):
        c[a, b] += v
    if normalized:
        c /= basis_raw_norm(i, j, rho)
    return SymSeries2(c, rho, degree)


@lru_cache(maxsize=None)
def _coord_maps(N, degree, rho):
    """Matrices between flattened coefficient arrays and psi-coordinates.

    ``P @ vec(c)`` gives the coordinates ``s_{i,j}`` (read off the leading
    monomial of each basis element); ``E @ v`` rebuilds ``vec(c)``.
    """
    pairs = _index_table(N)[0]
    size = (degree + 1) ** 2
    P = np.zeros((len(pairs), size))
    E = np.zeros((size, len(pairs)))
    for k, (i, j) in enumerate(pairs):
        nrm = basis_raw_norm(i, j, rho)
        if i == -1:
            P[k, j] = nrm
        elif i == j:
            P[k, (i + 1) * (degree + 1) + j] = nrm / 2.0
        else:
            P[k, (i + 1) * (degree + 1) + j] = nrm
        for (a, b), v in _basis_terms(i, j):
            E[a * (degree + 1) + b, k] += v / nrm
    P.setflags(write=False)
    E.setflags(write=False)
    return P, E


def to_coords(s, N):
    """Coordinates of ``s`` in the normalized basis of ``I_N``."""
    P, _ = _coord_maps(N, s.degree, s.rho)
    return P @ s.coeffs.ravel()


def from_coords(v, N, degree=DEFAULT_DEGREE, rho=DEFAULT_RHO):
    _, E = _coord_maps(N, degree, rho)
    c = (E @ np.asarray(v, float)).reshape(degree + 1, degree + 1)
    return Series2._wrap(c, float(rho), degree)


def coord_matrices(N, degree=DEFAULT_DEGREE, rho=DEFAULT_RHO):
    return _coord_maps(N, degree, float(rho))


def symmetric_part(s, N=None):
    """Projection onto the span of ``psi_{i,j}``, ``(i, j) in I_N``."""
    N = s.degree if N is None else N
    return from_coords(to_coords(s, N), N, s.degree, s.rho)

