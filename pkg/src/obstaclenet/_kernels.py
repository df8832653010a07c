"""Fused loops for the network passes used inside training.

These avoid allocating ``(n, N)`` temporaries on every objective call.
"""

import math

import numpy as np
from numba import njit

RELU2, SIGMOID, TANH = 0, 1, 2
CODES = {"relu2": RELU2, "sigmoid": SIGMOID, "tanh": TANH}


@njit(cache=True, inline="always")
def _act(code, s):
    if code == RELU2:
        if s > 0.0:
            return s * s, 2.0 * s, 2.0
        return 0.0, 0.0, 0.0
    if code == SIGMOID:
        g = 0.5 * (1.0 + math.tanh(0.5 * s))
        g1 = g * (1.0 - g)
        return g, g1, g1 * (1.0 - 2.0 * g)
    t = math.tanh(s)
    g1 = 1.0 - t * t
    return t, g1, -2.0 * t * g1


@njit(cache=True)
def evaluate(x, W1, b1, W2, b2, code):
    n, p = x.shape
    N = W1.shape[1]
    U = np.empty(n)
    G = np.zeros((n, p))
    for i in range(n):
        acc = b2
        for j in range(N):
            z = b1[j]
            for m in range(p):
                z += x[i, m] * W1[m, j]
            s0, s1, _ = _act(code, z)
            acc += W2[j] * s0
            w = W2[j] * s1
            for m in range(p):
                G[i, m] += w * W1[m, j]
        U[i] = acc
    return U, G


@njit(cache=True)
def pullback(x, W1, b1, W2, code, c, a):
    n, p = x.shape
    N = W1.shape[1]
    gW1 = np.zeros((p, N))
    gb1 = np.zeros(N)
    gW2 = np.zeros(N)
    for i in range(n):
        ci = c[i]
        for j in range(N):
            z = b1[j]
            A = 0.0
            for m in range(p):
                z += x[i, m] * W1[m, j]
                A += a[i, m] * W1[m, j]
            s0, s1, s2 = _act(code, z)
            gW2[j] += ci * s0 + A * s1
            t1 = ci * s1 + A * s2
            gb1[j] += t1
            for m in range(p):
                gW1[m, j] += x[i, m] * t1 + a[i, m] * s1
    for j in range(N):
        gb1[j] *= W2[j]
        for m in range(p):
            gW1[m, j] *= W2[j]
    return gW1, gb1, gW2, c.sum()
