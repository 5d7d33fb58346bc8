"""Independent reference implementations used as test oracles."""

import math

import numpy as np


def dct_reference(v):
    """Direct O(N^2) orthonormal DCT-II."""
    n = len(v)
    out = []
    for k in range(n):
        s = math.sqrt(1.0 / n) if k == 0 else math.sqrt(2.0 / n)
        out.append(s * sum(v[i] * math.cos(math.pi * k * (2 * i + 1) / (2 * n)) for i in range(n)))
    return np.array(out)


def kkt_violation(alphas, y, K, b, c):
    r = y * ((alphas * y) @ K + b) - 1.0
    at_zero = alphas <= 0
    at_c = alphas >= c
    free = ~at_zero & ~at_c
    return max(np.max(-r[at_zero], initial=-np.inf), np.max(r[at_c], initial=-np.inf),
               np.max(np.abs(r[free]), initial=-np.inf))


def qp_reference(K, y, c, iters=3000):
    """Accelerated projected gradient ascent on the SVM dual."""
    Q = (y[:, None] * y[None, :]) * K
    step = 1.0 / np.linalg.eigvalsh(Q)[-1]
    a = z = np.zeros(len(y))
    t = 1.0
    for _ in range(iters):
        a_next = project(z + step * (1.0 - Q @ z), y, c)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z = a_next + ((t - 1.0) / t_next) * (a_next - a)
        a, t = a_next, t_next
    return a


def project(v, y, c):
    """Exact Euclidean projection onto {0 <= a <= c, y.a = 0}.

    s(lam) = y . clip(v - lam*y, 0, c) is nonincreasing and piecewise linear
    with breakpoints at y*v and y*(v - c); locate the root between them.
    """
    knots = np.unique(np.r_[y * v, y * (v - c)])
    s = (y[None, :] * np.clip(v[None, :] - knots[:, None] * y[None, :], 0, c)).sum(axis=1)
    k = int(np.searchsorted(-s, 0.0))
    if k == 0:
        lam = knots[0]
    elif k == len(knots):
        lam = knots[-1]
    else:
        lam = knots[k - 1] + s[k - 1] * (knots[k] - knots[k - 1]) / (s[k - 1] - s[k])
    return np.clip(v - lam * y, 0, c)
