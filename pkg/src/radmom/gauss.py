"""Gauss-Legendre nodes and weights at arbitrary precision.

Nodes are the roots of the Legendre polynomial, found by Newton iteration
from Chebyshev-like double-precision seeds, refined at the working
precision plus guard bits. Results are cached per (order, precision) and
shared by both kernel lanes, so the two lanes integrate with bit-identical
rules.
"""

import math

import gmpy2
from gmpy2 import mpfr

_cache = {}


def _legendre_pair(n, x):
    """(P_n(x), P_{n-1}(x)) by upward recurrence."""
    p0 = mpfr(1)
    p1 = x
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    return p1, p0


def nodes_weights(n, prec=None):
    """Ascending nodes and weights of the n-point rule on [-1, 1]."""
    if prec is None:
        prec = gmpy2.get_context().precision
    key = (n, prec)
    hit = _cache.get(key)
    if hit is not None:
        return hit
    with gmpy2.context(precision=prec + 64):
        stop = mpfr(2) ** -(prec + 16)
        pos = []
        for i in range(n // 2):
            x = mpfr(math.cos(math.pi * (i + 0.75) / (n + 0.5)))
            for _ in range(80):
                pn, pn1 = _legendre_pair(n, x)
                dp = n * (x * pn - pn1) / (x * x - 1)
                dx = pn / dp
                x = x - dx
                if abs(dx) <= stop:
                    break
            pn, pn1 = _legendre_pair(n, x)
            dp = n * (x * pn - pn1) / (x * x - 1)
            pos.append((x, 2 / ((1 - x * x) * dp * dp)))
        mid = []
        if n % 2:
            pn, pn1 = _legendre_pair(n, mpfr(0))
            dp = n * (0 - pn1) / mpfr(-1)
            mid = [(mpfr(0), 2 / (dp * dp))]
        full = [(-x, w) for x, w in pos] + mid + [(x, w) for x, w in reversed(pos)]
    with gmpy2.context(precision=prec):
        nodes = tuple(mpfr(x) for x, _ in full)
        weights = tuple(mpfr(w) for _, w in full)
    _cache[key] = (nodes, weights)
    return _cache[key]
