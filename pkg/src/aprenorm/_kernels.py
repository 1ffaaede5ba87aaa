"""Compiled inner loops for triangular bivariate coefficient arrays.

Arrays are square ``(N+1, N+1)`` with ``c[i, j]`` the coefficient of
``x**i * y**j``; entries with ``i + j > N`` are ignored on input and zero on
output.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def tri_mul(a, b, n):
    out = np.zeros((n + 1, n + 1))
    for k in range(n + 1):
        for l in range(n + 1 - k):
            akl = a[k, l]
            if akl == 0.0:
                continue
            for i in range(n + 1 - k - l):
                m = n - k - l - i
                for j in range(m + 1):
                    out[k + i, l + j] += akl * b[i, j]
    return out


@njit(cache=True)
def tri_reciprocal(d, n):
    r = np.zeros((n + 1, n + 1))
    d00 = d[0, 0]
    r[0, 0] = 1.0 / d00
    for deg in range(1, n + 1):
        for i in range(deg + 1):
            j = deg - i
            acc = 0.0
            for k in range(i + 1):
                for l in range(j + 1):
                    if k == 0 and l == 0:
                        continue
                    acc += d[k, l] * r[i - k, j - l]
            r[i, j] = -acc / d00
    return r


@njit(cache=True)
def tri_eval(c, n, x, y):
    total = 0.0
    for i in range(n, -1, -1):
        row = 0.0
        for j in range(n - i, -1, -1):
            row = row * y + c[i, j]
        total = total * x + row
    return total


@njit(cache=True)
def tri_eval_grad(c, n, x, y):
    """Value and both partials of the polynomial at one point."""
    v = 0.0
    vx = 0.0
    vy = 0.0
    for i in range(n, -1, -1):
        row = 0.0
        drow = 0.0
        for j in range(n - i, -1, -1):
            drow = drow * y + row
            row = row * y + c[i, j]
        vx = vx * x + v
        v = v * x + row
        vy = vy * x + drow
    return v, vx, vy


@njit(cache=True)
def tri_eval_grad_many(c, n, xs, ys):
    m = xs.shape[0]
    v = np.empty(m)
    vx = np.empty(m)
    vy = np.empty(m)
    for k in range(m):
        a, b, d = tri_eval_grad(c, n, xs[k], ys[k])
        v[k] = a
        vx[k] = b
        vy[k] = d
    return v, vx, vy
