"""Pure-Python kernel lane.

These are the hot numerical kernels of the toolkit, written against
gmpy2.mpfr. The compiled lane (_kernels.pyx) mirrors every operation in
the same order with the same MPFR rounding, so the two lanes produce
bit-identical results; this module is the reference for that contract.

Density descriptors are plain tuples built by density.py:

    ("uniform", scale)
    ("monomial", a, b, scale)            scale * x1^a * x2^b
    ("poly", ((a, b, coef), ...))        sum of monomial terms
    ("bumpprod", cx, cy, w, amp)         amp * g((x1-cx)/w) * g((x2-cy)/w),
                                         g(u) = exp(-1/(1-u^2)) on |u|<1
    ("bilinear", nx, ny, values)         bilinear on a uniform grid, values
                                         flattened with the y index fastest

All kernels take the working precision explicitly and run under their own
gmpy2 context, so results do not depend on the caller's context state.
"""

import gmpy2
from gmpy2 import mpfr

BACKEND_NAME = "python"

MAX_DEPTH = 60


def _density_eval(desc, x1, x2):
    kind = desc[0]
    if kind == "uniform":
        return desc[1]
    if kind == "monomial":
        _, a, b, scale = desc
        r = scale
        if a:
            r = r * x1**a
        if b:
            r = r * x2**b
        return r
    if kind == "poly":
        acc = mpfr(0)
        for a, b, coef in desc[1]:
            t = coef
            if a:
                t = t * x1**a
            if b:
                t = t * x2**b
            acc = acc + t
        return acc
    if kind == "bumpprod":
        _, cx, cy, w, amp = desc
        u = (x1 - cx) / w
        u2 = u * u
        if u2 >= 1:
            return mpfr(0)
        v = (x2 - cy) / w
        v2 = v * v
        if v2 >= 1:
            return mpfr(0)
        g1 = gmpy2.exp(-1 / (1 - u2))
        g2 = gmpy2.exp(-1 / (1 - v2))
        return amp * g1 * g2
    if kind == "bilinear":
        _, nx, ny, vals = desc
        fx = x1 * (nx - 1)
        ix = int(gmpy2.floor(fx))
        if ix < 0:
            ix = 0
        elif ix > nx - 2:
            ix = nx - 2
        wx = fx - ix
        fy = x2 * (ny - 1)
        iy = int(gmpy2.floor(fy))
        if iy < 0:
            iy = 0
        elif iy > ny - 2:
            iy = ny - 2
        wy = fy - iy
        a00 = vals[ix * ny + iy]
        a10 = vals[(ix + 1) * ny + iy]
        a01 = vals[ix * ny + iy + 1]
        a11 = vals[(ix + 1) * ny + iy + 1]
        ox = 1 - wx
        oy = 1 - wy
        return a00 * ox * oy + a10 * wx * oy + a01 * ox * wy + a11 * wx * wy
    raise ValueError("unknown density descriptor %r" % (kind,))


def _axis_interval(v0, slope):
    """t-range with 0 <= v0 + slope*t <= 1, or None when empty."""
    if slope == 0:
        if 0 <= v0 <= 1:
            return (mpfr("-inf"), mpfr("inf"))
        return None
    ta = (-v0) / slope
    tb = (1 - v0) / slope
    if ta <= tb:
        return (ta, tb)
    return (tb, ta)


def _chord_range(c, s, pc, ps):
    """Chord parameter range of the line p*w + t*w_perp inside [0,1]^2."""
    i1 = _axis_interval(pc, -s)
    if i1 is None:
        return None
    i2 = _axis_interval(ps, c)
    if i2 is None:
        return None
    lo = i1[0] if i1[0] >= i2[0] else i2[0]
    hi = i1[1] if i1[1] <= i2[1] else i2[1]
    if not lo < hi:
        return None
    return (lo, hi)


def _gl(f, a, b, nodes, weights):
    c = (a + b) / 2
    h = (b - a) / 2
    acc = mpfr(0)
    for i in range(len(nodes)):
        acc = acc + weights[i] * f(c + h * nodes[i])
    return acc * h


def _adapt(f, a, b, tol, whole, depth, nodes, weights, max_depth, defect):
    m = (a + b) / 2
    left = _gl(f, a, m, nodes, weights)
    right = _gl(f, m, b, nodes, weights)
    s = left + right
    d = abs(s - whole)
    if d <= tol or depth >= max_depth:
        if d > tol:
            defect[0] = defect[0] + d
        return s
    t2 = tol / 2
    return _adapt(f, a, m, t2, left, depth + 1, nodes, weights, max_depth, defect) + _adapt(
        f, m, b, t2, right, depth + 1, nodes, weights, max_depth, defect
    )


def integrate_callback(f, a, b, tol, nodes, weights, max_depth=MAX_DEPTH, splits=()):
    """Adaptive Gauss-Legendre quadrature of a Python callable.

    Returns (value, defect) where defect is the summed error estimate of
    panels that exhausted the refinement depth (0 when converged). This
    helper always runs in Python: a callback dominates the cost, so it is
    never dispatched to the compiled lane.
    """
    pts = [a]
    for sp in splits:
        if a < sp < b:
            pts.append(sp)
    pts.append(b)
    defect = [mpfr(0)]
    acc = mpfr(0)
    for i in range(len(pts) - 1):
        lo, hi = pts[i], pts[i + 1]
        whole = _gl(f, lo, hi, nodes, weights)
        acc = acc + _adapt(f, lo, hi, tol, whole, 0, nodes, weights, max_depth, defect)
    return acc, defect[0]


def chord_integral(desc, theta, p, prec, tol, nodes, weights, max_depth=MAX_DEPTH):
    """Line integral of the density over the chord at (theta, p)."""
    with gmpy2.context(precision=prec):
        value, defect = _chord_core(desc, theta, p, tol, nodes, weights, max_depth)
        return value, defect


def _chord_core(desc, theta, p, tol, nodes, weights, max_depth):
    c = gmpy2.cos(theta)
    s = gmpy2.sin(theta)
    pc = p * c
    ps = p * s
    rng = _chord_range(c, s, pc, ps)
    if rng is None:
        return mpfr(0), mpfr(0)
    lo, hi = rng

    def f(t):
        return _density_eval(desc, pc - t * s, ps + t * c)

    defect = [mpfr(0)]
    whole = _gl(f, lo, hi, nodes, weights)
    value = _adapt(f, lo, hi, tol, whole, 0, nodes, weights, max_depth, defect)
    return value, defect[0]


def sinogram_values(desc, thetas, offsets, prec, tol, nodes, weights, max_depth=MAX_DEPTH):
    """Chord integrals over the full angle x offset grid."""
    with gmpy2.context(precision=prec):
        rows = []
        defect = mpfr(0)
        for theta in thetas:
            row = []
            for p in offsets:
                v, d = _chord_core(desc, theta, p, tol, nodes, weights, max_depth)
                defect = defect + d
                row.append(v)
            rows.append(row)
        return rows, defect


def _moment_chord(desc, cs, p, tol, nodes, weights, max_depth, defect):
    c, s = cs
    pc = p * c
    ps = p * s
    rng = _chord_range(c, s, pc, ps)
    if rng is None:
        return mpfr(0)
    lo, hi = rng

    def f(t):
        return _density_eval(desc, pc - t * s, ps + t * c)

    whole = _gl(f, lo, hi, nodes, weights)
    return _adapt(f, lo, hi, tol, whole, 0, nodes, weights, max_depth, defect)


def _gl_moment_vec(desc, cs, a, b, kmax, chord_tol, nodes_c, weights_c, nodes_o, weights_o, max_depth, defect):
    c = (a + b) / 2
    h = (b - a) / 2
    acc = [mpfr(0) for _ in range(kmax + 1)]
    for i in range(len(nodes_o)):
        x = c + h * nodes_o[i]
        ch = _moment_chord(desc, cs, x, chord_tol, nodes_c, weights_c, max_depth, defect)
        t = weights_o[i] * ch
        acc[0] = acc[0] + t
        for k in range(1, kmax + 1):
            t = t * x
            acc[k] = acc[k] + t
    for k in range(kmax + 1):
        acc[k] = acc[k] * h
    return acc


def _adapt_vec(desc, cs, a, b, tol, whole, depth, kmax, chord_tol, nodes_c, weights_c, nodes_o, weights_o, max_depth, defect):
    m = (a + b) / 2
    left = _gl_moment_vec(desc, cs, a, m, kmax, chord_tol, nodes_c, weights_c, nodes_o, weights_o, max_depth, defect)
    right = _gl_moment_vec(desc, cs, m, b, kmax, chord_tol, nodes_c, weights_c, nodes_o, weights_o, max_depth, defect)
    s = [left[k] + right[k] for k in range(kmax + 1)]
    d = mpfr(0)
    for k in range(kmax + 1):
        dk = abs(s[k] - whole[k])
        if dk > d:
            d = dk
    if d <= tol or depth >= max_depth:
        if d > tol:
            defect[0] = defect[0] + d
        return s
    t2 = tol / 2
    lo = _adapt_vec(desc, cs, a, m, t2, left, depth + 1, kmax, chord_tol, nodes_c, weights_c, nodes_o, weights_o, max_depth, defect)
    hi = _adapt_vec(desc, cs, m, b, t2, right, depth + 1, kmax, chord_tol, nodes_c, weights_c, nodes_o, weights_o, max_depth, defect)
    return [lo[k] + hi[k] for k in range(kmax + 1)]


def radon_moment_vector(desc, theta, kmax, prec, tol, chord_tol, splits, nodes_c, weights_c, nodes_o, weights_o, max_depth=MAX_DEPTH):
    """All offset moments b_k = int Rf(theta,p) p^k dp for k = 0..kmax.

    splits are the support breakpoints (square-corner projections); the
    transform is smooth between consecutive splits, so each sub-interval
    converges at the quadrature's full rate.
    """
    with gmpy2.context(precision=prec):
        cs = (gmpy2.cos(theta), gmpy2.sin(theta))
        defect = [mpfr(0)]
        out = [mpfr(0) for _ in range(kmax + 1)]
        for i in range(len(splits) - 1):
            a, b = splits[i], splits[i + 1]
            if not a < b:
                continue
            whole = _gl_moment_vec(desc, cs, a, b, kmax, chord_tol, nodes_c, weights_c, nodes_o, weights_o, max_depth, defect)
            seg = _adapt_vec(desc, cs, a, b, tol, whole, 0, kmax, chord_tol, nodes_c, weights_c, nodes_o, weights_o, max_depth, defect)
            for k in range(kmax + 1):
                out[k] = out[k] + seg[k]
        return out, defect[0]


def ml_sum(gam, m, n, mu, nu, prec):
    """Alternating beta-synthesis sum from the moment rectangle.

    gam[a1][a2] holds the moment of order (mu+a1, nu+a2) for
    a1 <= m-mu, a2 <= n-nu. Returns (value, max_term) where max_term is
    the largest intermediate term magnitude scaled like the result, the
    cancellation monitor.
    """
    with gmpy2.context(precision=prec):
        M = m - mu
        N = n - nu
        acc = mpfr(0)
        maxt = mpfr(0)
        for a1 in range(M + 1):
            fa1 = gmpy2.fac(a1) * gmpy2.fac(M - a1)
            row = gam[a1]
            for a2 in range(N + 1):
                div = fa1 * gmpy2.fac(a2) * gmpy2.fac(N - a2)
                term = row[a2] / div
                at = abs(term)
                if at > maxt:
                    maxt = at
                if (a1 + a2) % 2:
                    acc = acc - term
                else:
                    acc = acc + term
        cmn = (gmpy2.fac(m + 1) // gmpy2.fac(mu)) * (gmpy2.fac(n + 1) // gmpy2.fac(nu))
        return acc * cmn, maxt * cmn


def convolve_uniform(rows, kernel, dp, prec):
    """Per-row discrete convolution with trapezoid weight dp.

    kernel[l] samples the smoothing kernel at (l - L)*dp for l = 0..2L;
    out-of-range row samples are exact zeros and are skipped.
    """
    with gmpy2.context(precision=prec):
        L = (len(kernel) - 1) // 2
        out = []
        for row in rows:
            mcols = len(row)
            orow = []
            for j in range(mcols):
                acc = mpfr(0)
                for l in range(len(kernel)):
                    idx = j - l + L
                    if 0 <= idx < mcols:
                        acc = acc + kernel[l] * row[idx]
                orow.append(acc * dp)
            out.append(orow)
        return out


def trapezoid_moments(row, offsets, kmax, dp, prec):
    """Trapezoid-rule offset moments of one sinogram row."""
    with gmpy2.context(precision=prec):
        mcols = len(row)
        half = dp / 2
        w = [half] + [dp] * (mcols - 2) + [half]
        cur = list(row)
        out = []
        for k in range(kmax + 1):
            if k > 0:
                for j in range(mcols):
                    cur[j] = cur[j] * offsets[j]
            acc = mpfr(0)
            for j in range(mcols):
                acc = acc + w[j] * cur[j]
            out.append(acc)
        return out


def lu_solve(A, Bs, prec, pivot_floor):
    """Partial-pivot LU solve for several right-hand sides.

    Returns (solutions, min_pivot, det). Raises ValueError when a pivot
    magnitude falls below pivot_floor (near-singular matrix).
    """
    with gmpy2.context(precision=prec):
        n = len(A)
        M = [list(r) for r in A]
        X = [list(b) for b in Bs]
        sign = 1
        min_piv = None
        for col in range(n):
            p = col
            best = abs(M[col][col])
            for r in range(col + 1, n):
                ar = abs(M[r][col])
                if ar > best:
                    best = ar
                    p = r
            if best < pivot_floor:
                raise ValueError("pivot %s below threshold at column %d" % (best, col))
            if p != col:
                M[col], M[p] = M[p], M[col]
                sign = -sign
                for b in X:
                    b[col], b[p] = b[p], b[col]
            piv = M[col][col]
            apiv = abs(piv)
            if min_piv is None or apiv < min_piv:
                min_piv = apiv
            for r in range(col + 1, n):
                f = M[r][col] / piv
                M[r][col] = f
                for c2 in range(col + 1, n):
                    M[r][c2] = M[r][c2] - f * M[col][c2]
                for b in X:
                    b[r] = b[r] - f * b[col]
        det = mpfr(sign)
        for i in range(n):
            det = det * M[i][i]
        for b in X:
            for r in range(n - 1, -1, -1):
                acc = b[r]
                for c2 in range(r + 1, n):
                    acc = acc - M[r][c2] * b[c2]
                b[r] = acc / M[r][r]
        return X, min_piv, det


def lower_tri_solve(L, y, prec, pivot_floor):
    """Forward substitution for a lower-triangular system."""
    with gmpy2.context(precision=prec):
        n = len(L)
        x = []
        for r in range(n):
            d = L[r][r]
            if abs(d) < pivot_floor:
                raise ValueError("zero diagonal %s at row %d" % (d, r))
            acc = y[r]
            row = L[r]
            for c in range(r):
                acc = acc - row[c] * x[c]
            x.append(acc / d)
        return x
