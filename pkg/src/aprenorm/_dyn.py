"""Compiled kernels for twist-map dynamics and presentation-function chains.

Status codes returned by the kernels: 0 success, 1 vanishing twist,
2 implicit solve failed, 3 left the evaluation disk.
"""
import numpy as np
from numba import njit

from ._kernels import tri_eval, tri_eval_grad

OK, TWIST, NOSOLVE, ESCAPE = 0, 1, 2, 3
EPS = 2.220446049250313e-16


@njit(cache=True)
def solve_y(c, n, x, w, y0):
    """Root ``y`` of ``s(y, x) = w`` by Newton from ``y0``, bisection fallback."""
    y = y0
    prev = np.inf
    for it in range(50):
        v, s1, _ = tri_eval_grad(c, n, y, x)
        if s1 == 0.0 or not np.isfinite(s1):
            break
        step = (v - w) / s1
        y -= step
        a = abs(step)
        if a <= 2.0 * EPS * max(abs(y), 1e-300):
            v, s1, _ = tri_eval_grad(c, n, y, x)
            if s1 == 0.0:
                return y, TWIST
            return y - (v - w) / s1, OK
        # rounding floor: the correction stopped shrinking while already tiny
        if it >= 2 and a >= 0.5 * prev and a <= 1e-10 * max(abs(y), 1e-300):
            return y, OK
        prev = a
    # bracket around the seed, then bisection
    h = 1e-3
    fa = 0.0
    fb = 0.0
    a = y0
    b = y0
    found = False
    for _ in range(40):
        a = y0 - h
        b = y0 + h
        fa = tri_eval(c, n, a, x) - w
        fb = tri_eval(c, n, b, x) - w
        if fa * fb <= 0.0:
            found = True
            break
        h *= 2.0
    if not found:
        return y0, NOSOLVE
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = tri_eval(c, n, m, x) - w
        if fm == 0.0 or b - a <= 2.0 * EPS * max(abs(m), 1e-300):
            return m, OK
        if fa * fm < 0.0:
            b = m
            fb = fm
        else:
            a = m
            fa = fm
    return 0.5 * (a + b), OK


@njit(cache=True)
def step(c, n, x, u, y0, inverse, radius, out):
    """One application of ``F`` (or ``F^-1``); writes ``y, v, J00, J01, J10, J11``
    into ``out`` and returns a status code."""
    w = u if inverse else -u
    y, st = solve_y(c, n, x, w, y0)
    if st != OK:
        return st
    if abs(y) > radius or abs(x) > radius:
        return ESCAPE
    v, s1xy, s2xy = tri_eval_grad(c, n, x, y)
    _, s1yx, s2yx = tri_eval_grad(c, n, y, x)
    if s1yx == 0.0:
        return TWIST
    yx = -s2yx / s1yx
    if inverse:
        yu = 1.0 / s1yx
        out[1] = -v
        out[4] = -(s1xy + s2xy * yx)
        out[5] = -s2xy * yu
    else:
        yu = -1.0 / s1yx
        out[1] = v
        out[4] = s1xy + s2xy * yx
        out[5] = s2xy * yu
    out[0] = y
    out[2] = yx
    out[3] = yu
    return OK


@njit(cache=True)
def _mat_left(a00, a01, a10, a11, J):
    b00 = a00 * J[0, 0] + a01 * J[1, 0]
    b01 = a00 * J[0, 1] + a01 * J[1, 1]
    b10 = a10 * J[0, 0] + a11 * J[1, 0]
    b11 = a10 * J[0, 1] + a11 * J[1, 1]
    J[0, 0] = b00
    J[0, 1] = b01
    J[1, 0] = b10
    J[1, 1] = b11


@njit(cache=True)
def psi_forward(C, n, lam, mu, bits, nb, x, u, seeds, rec_pre, rec_y, J, radius):
    """``Psi_w(x, u)`` for the word ``bits[:nb]`` (bit 0 outermost).

    Level ``k`` uses ``C[k]`` (or ``C[0]`` when only one level is given).
    ``J`` receives the chain derivative.  ``rec_pre[k]`` / ``rec_y[k]``
    record the x-coordinate entering ``F`` and the solved ``y`` at level
    ``k``; ``seeds[k]`` (NaN for none) seeds the solve.
    """
    out = np.empty(6)
    J[0, 0] = 1.0
    J[0, 1] = 0.0
    J[1, 0] = 0.0
    J[1, 1] = 1.0
    L = C.shape[0]
    for k in range(nb - 1, -1, -1):
        lv = k if L > 1 else 0
        x = lam[lv] * x
        u = mu[lv] * u
        _mat_left(lam[lv], 0.0, 0.0, mu[lv], J)
        if bits[k]:
            y0 = seeds[k] if np.isfinite(seeds[k]) else x
            rec_pre[k] = x
            st = step(C[lv], n, x, u, y0, False, radius, out)
            if st != OK:
                return x, u, st
            rec_y[k] = out[0]
            x = out[0]
            u = out[1]
            _mat_left(out[2], out[3], out[4], out[5], J)
    return x, u, OK


@njit(cache=True)
def psi_inverse(C, n, lam, mu, bits, nb, x, u, seeds, J, radius):
    """``Psi_w^{-1}(x, u)`` with ``J`` the derivative of the inverse chain."""
    out = np.empty(6)
    J[0, 0] = 1.0
    J[0, 1] = 0.0
    J[1, 0] = 0.0
    J[1, 1] = 1.0
    L = C.shape[0]
    for k in range(nb):
        lv = k if L > 1 else 0
        if bits[k]:
            y0 = seeds[k] if np.isfinite(seeds[k]) else x
            st = step(C[lv], n, x, u, y0, True, radius, out)
            if st != OK:
                return x, u, st
            x = out[0]
            u = out[1]
            _mat_left(out[2], out[3], out[4], out[5], J)
        x = x / lam[lv]
        u = u / mu[lv]
        _mat_left(1.0 / lam[lv], 0.0, 0.0, 1.0 / mu[lv], J)
    return x, u, OK


@njit(cache=True)
def orbit_points(C, n, lam, mu, nbits, x0, u0, radius, pts, jac, status):
    """All ``2**nbits`` points ``Psi_w(x0, u0)`` in order of ``k(w)``."""
    count = 1 << nbits
    bits = np.zeros(max(nbits, 1), np.int8)
    seeds = np.full(max(nbits, 1), np.nan)
    pre = np.full(max(nbits, 1), np.nan)
    ys = np.full(max(nbits, 1), np.nan)
    J = np.empty((2, 2))
    for k in range(count):
        for b in range(nbits):
            bits[b] = (k >> b) & 1
        x, u, st = psi_forward(C, n, lam, mu, bits, nbits, x0, u0, seeds, pre, ys, J, radius)
        status[k] = st
        pts[k, 0] = x
        pts[k, 1] = u
        jac[k] = J
    return 0


@njit(cache=True)
def _spec_norm(a, b, c, d):
    # largest singular value of [[a, b], [c, d]]
    s = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = max(s * s - 4.0 * det * det, 0.0)
    return np.sqrt(0.5 * (s + np.sqrt(disc)))


@njit(cache=True)
def holder_word(
    Cs, ns, lam_s, mu_s, Ce, ne, lam_e, mu_e, bits, nb, px, pu, cos_t, sin_t, dfac, radius, norm_kind, Nout
):
    """``N_n`` over a grid of directions for one word and several families.

    ``Ce[e]`` holds the level stack of family ``e``.  Writes
    ``Nout[e, t]`` and returns ``(delta, |p|, status)``.
    """
    nbm = max(nb, 1)
    E = Ce.shape[0]
    nanseed = np.full(nbm, np.nan)
    pre_s = np.full(nbm, np.nan)
    y_s = np.full(nbm, np.nan)
    J = np.empty((2, 2))
    Jinv = np.empty((2, 2))
    Je = np.empty((2, 2))
    dummy_a = np.full(nbm, np.nan)
    dummy_b = np.full(nbm, np.nan)
    x, u, st = psi_forward(Cs, ns, lam_s, mu_s, bits, nb, px, pu, nanseed, pre_s, y_s, J, radius)
    if st != 0:
        return 0.0, 0.0, st
    pnorm = np.sqrt(x * x + u * u)
    delta = dfac * pnorm
    # family forward chains at p*, recorded for seeding
    y_e = np.full((E, nbm), np.nan)
    pre_e = np.full((E, nbm), np.nan)
    for e in range(E):
        _, _, st = psi_forward(Ce[e], ne, lam_e[e], mu_e[e], bits, nb, px, pu, y_s, pre_e[e], y_e[e], Je, radius)
        if st != 0:
            return delta, pnorm, st
    base = np.empty((E, 4))
    T = cos_t.shape[0]
    for t in range(-1, T):
        if t < 0:
            qx, qu = x, u
        else:
            qx, qu = x + delta * cos_t[t], u + delta * sin_t[t]
        q0, q1, st = psi_inverse(Cs, ns, lam_s, mu_s, bits, nb, qx, qu, pre_s, Jinv, radius)
        if st != 0:
            return delta, pnorm, st
        for e in range(E):
            _, _, st = psi_forward(Ce[e], ne, lam_e[e], mu_e[e], bits, nb, q0, q1, y_e[e], dummy_a, dummy_b, Je, radius)
            if st != 0:
                return delta, pnorm, st
            d00 = Je[0, 0] * Jinv[0, 0] + Je[0, 1] * Jinv[1, 0]
            d01 = Je[0, 0] * Jinv[0, 1] + Je[0, 1] * Jinv[1, 1]
            d10 = Je[1, 0] * Jinv[0, 0] + Je[1, 1] * Jinv[1, 0]
            d11 = Je[1, 0] * Jinv[0, 1] + Je[1, 1] * Jinv[1, 1]
            if t < 0:
                base[e, 0] = d00
                base[e, 1] = d01
                base[e, 2] = d10
                base[e, 3] = d11
            else:
                a = base[e, 0] - d00
                b = base[e, 1] - d01
                c = base[e, 2] - d10
                d = base[e, 3] - d11
                if norm_kind == 0:
                    Nout[e, t] = _spec_norm(a, b, c, d)
                else:
                    Nout[e, t] = np.sqrt(a * a + b * b + c * c + d * d)
    return delta, pnorm, 0


@njit(cache=True)
def holder_level(
    Cs, ns, lam_s, mu_s, Ce, ne, lam_e, mu_e, nb, px, pu, cos_t, sin_t, dfac, radius, norm_kind, M, argt, delta, status
):
    """Run :func:`holder_word` over all words of length ``nb``; stores the
    max over the grid per family in ``M[e, k]``, the maximizing grid index
    in ``argt[e, k]``."""
    E = Ce.shape[0]
    T = cos_t.shape[0]
    Nout = np.empty((E, T))
    bits = np.zeros(max(nb, 1), np.int8)
    for k in range(1 << nb):
        for b in range(nb):
            bits[b] = (k >> b) & 1
        d, _, st = holder_word(
            Cs, ns, lam_s, mu_s, Ce, ne, lam_e, mu_e, bits, nb, px, pu, cos_t, sin_t, dfac, radius, norm_kind, Nout
        )
        delta[k] = d
        status[k] = st
        if st != 0:
            return k
        for e in range(E):
            best = -1.0
            bi = 0
            for t in range(T):
                if Nout[e, t] > best:
                    best = Nout[e, t]
                    bi = t
            M[e, k] = best
            argt[e, k] = bi
    return -1


@njit(cache=True)
def cocycle_run(c, n, x, u, vx, vu, M, radius, angles, lognorm):
    """Iterate ``F`` from ``(x, u)`` with the tangent vector; angles of the
    normalized vector before each step, and the accumulated log growth."""
    out = np.empty(6)
    y0 = x
    acc = 0.0
    for k in range(M):
        ang = np.arctan2(vu, vx)
        if ang < 0.0:
            ang += 2.0 * np.pi
        angles[k] = ang
        st = step(c, n, x, u, y0, False, radius, out)
        if st != 0:
            lognorm[0] = acc
            return k, st
        wx = out[2] * vx + out[3] * vu
        wu = out[4] * vx + out[5] * vu
        r = np.sqrt(wx * wx + wu * wu)
        acc += np.log(r)
        vx = wx / r
        vu = wu / r
        x = out[0]
        u = out[1]
        y0 = x
    lognorm[0] = acc
    return M, 0
