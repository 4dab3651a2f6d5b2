"""Independent numerical oracles used to pin expected test values.

Deliberately unrelated to the package's Gauss-Legendre machinery: a
composite trapezoid rule with Richardson extrapolation, plus direct
closed forms. Slow but simple; correctness over speed.
"""

import gmpy2
from gmpy2 import mpfr


def trapezoid(f, a, b, n):
    h = (b - a) / n
    s = (f(a) + f(b)) / 2
    for i in range(1, n):
        s += f(a + i * h)
    return s * h


def trapezoid_richardson(f, a, b, n0=256, levels=4):
    """Romberg-style extrapolated trapezoid ladder starting at n0 panels."""
    vals = [trapezoid(f, a, b, n0 * 2**i) for i in range(levels)]
    for j in range(1, levels):
        fac = mpfr(4) ** j
        vals = [
            (fac * vals[i + 1] - vals[i]) / (fac - 1) for i in range(len(vals) - 1)
        ]
    return vals[0]


def bump_profile(t):
    """exp(-1/(1-t^2)) on (-1,1), zero outside."""
    if abs(t) >= 1:
        return mpfr(0)
    return gmpy2.exp(-1 / (1 - t * t))


def bump_normalization(n=4096):
    """1 / integral of the unit bump profile (trapezoid; superalgebraic)."""
    return 1 / trapezoid(bump_profile, mpfr(-1), mpfr(1), n)


def bump_moment(j, n=4096):
    """Unit-bandwidth bump moment int t^j phi(t) dt, phi normalized."""
    raw = trapezoid(lambda t: t**j * bump_profile(t), mpfr(-1), mpfr(1), n)
    return raw * bump_normalization(n)


def chord_endpoints(theta, p):
    """Clipping of the line x = p*w + t*w_perp against the unit square."""
    c = gmpy2.cos(theta)
    s = gmpy2.sin(theta)
    los, his = [], []
    for v0, slope in ((p * c, -s), (p * s, c)):
        if slope == 0:
            if not 0 <= v0 <= 1:
                return None
            continue
        ta = (0 - v0) / slope
        tb = (1 - v0) / slope
        los.append(min(ta, tb))
        his.append(max(ta, tb))
    lo, hi = max(los), min(his)
    if not lo < hi:
        return None
    return lo, hi


def radon_oracle(density_eval, theta, p, n=2048):
    """Line-integral value by trapezoid over the clipped chord."""
    seg = chord_endpoints(theta, p)
    if seg is None:
        return mpfr(0)
    lo, hi = seg
    c = gmpy2.cos(theta)
    s = gmpy2.sin(theta)

    def f(t):
        return density_eval(p * c - t * s, p * s + t * c)

    return trapezoid_richardson(f, lo, hi, n0=n, levels=3)
