"""NumPy implementation of the delay search, used when the compiled kernel
is unavailable. Mirrors ``_mle_kernel.pyx`` step for step."""

import math

import numpy as np

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def alignment_score(re, im, omega, theta):
    ph = omega * theta
    return float(np.dot(re, np.cos(ph)) - np.dot(im, np.sin(ph)))


def search_delay(re, im, omega, lo, hi, step, tol, maxiter):
    n = max(int(math.ceil((hi - lo) / step)) + 1, 3)
    span = (hi - lo) / (n - 1)
    grid = lo + np.arange(n) * span
    ph = np.outer(grid, omega)
    scores = np.cos(ph) @ re - np.sin(ph) @ im
    best = int(np.argmax(scores))
    a = lo + (best - 1) * span if best > 0 else lo
    b = lo + (best + 1) * span if best < n - 1 else hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = alignment_score(re, im, omega, c)
    fd = alignment_score(re, im, omega, d)
    it = 0
    while b - a > tol and it < maxiter:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = alignment_score(re, im, omega, c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = alignment_score(re, im, omega, d)
        it += 1
    theta = 0.5 * (a + b)
    return theta, alignment_score(re, im, omega, theta), it, (b - a) <= tol
