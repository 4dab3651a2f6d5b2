"""Shared numerics: combinatorics, adaptive quadrature, linear solves.

Everything operates on gmpy2.mpfr at the working precision (see
precision.working_precision). Operations are pure and deterministic:
fixed panel ordering in quadrature, fixed summation order in solves.
"""

import gmpy2
from gmpy2 import mpfr

from . import gauss
from .backend import get_backend
from .errors import DomainError, QuadratureError, SingularMatrixError, ValidationError
from .precision import check_uniform_precision, current_precision, ensure_real

GL_NODES = 20
QUAD_MAX_DEPTH = 60


def binomial(k, j):
    """Binomial coefficient as an exact integer lifted to mpfr."""
    if j < 0 or k < 0:
        raise DomainError("binomial needs nonnegative arguments, got (%s, %s)" % (k, j))
    if j > k:
        raise DomainError("binomial(%d, %d): j exceeds k" % (k, j))
    return mpfr(gmpy2.bincoef(k, j))


def binomial_int(k, j):
    """Binomial coefficient as an exact mpz (internal fast path)."""
    return gmpy2.bincoef(k, j)


def integrate_1d(f, interval, tol, n_nodes=GL_NODES, splits=(), max_depth=QUAD_MAX_DEPTH):
    """Adaptive Gauss-Legendre quadrature with absolute-error target tol.

    Panels are refined left to right by bisection, halving the local
    budget, so the summation order is deterministic. Known breakpoints of
    the integrand can be passed in splits. Raises QuadratureError when
    panels exhaust the refinement depth with more residual error than tol.
    """
    a, b = ensure_real(interval[0]), ensure_real(interval[1])
    tol = ensure_real(tol)
    if not tol > 0:
        raise DomainError("tolerance must be positive, got %s" % tol)
    if not a <= b:
        raise DomainError("bad interval [%s, %s]" % (a, b))
    if a == b:
        return mpfr(0)
    nodes, weights = gauss.nodes_weights(n_nodes)
    from ._kernels_py import integrate_callback

    value, defect = integrate_callback(f, a, b, tol, nodes, weights, max_depth, splits)
    if defect > tol:
        raise QuadratureError(
            "quadrature did not reach tol=%s (achieved error estimate %s)" % (tol, defect),
            achieved=defect,
            requested=tol,
        )
    return value


def _pivot_floor():
    return mpfr(2) ** -(current_precision() - 8)


def solve_lower_triangular(L, y):
    """Forward substitution; diagonal entries must clear the rank floor."""
    n = len(L)
    if any(len(row) != n for row in L) or len(y) != n:
        raise ValidationError("triangular system shape mismatch")
    check_uniform_precision(v for row in L for v in row)
    check_uniform_precision(y)
    try:
        return get_backend().lower_tri_solve(L, y, current_precision(), _pivot_floor())
    except ValueError as exc:
        raise SingularMatrixError(str(exc)) from exc


def solve_dense(A, y):
    """LU solve with partial pivoting; see solve_dense_multi."""
    xs, _ = solve_dense_multi(A, [y])
    return xs[0]


def solve_dense_multi(A, ys):
    """Solve A x = y for several right-hand sides with one factorization.

    Returns (solutions, report) where report carries the minimum pivot
    magnitude and the determinant. Pivots below 2^-(P-8) raise
    SingularMatrixError carrying the pivot magnitude.
    """
    n = len(A)
    if any(len(row) != n for row in A) or any(len(y) != n for y in ys):
        raise ValidationError("dense system shape mismatch")
    check_uniform_precision(v for row in A for v in row)
    for y in ys:
        check_uniform_precision(y)
    try:
        xs, min_piv, det = get_backend().lu_solve(A, ys, current_precision(), _pivot_floor())
    except ValueError as exc:
        pivot = None
        try:
            pivot = float(str(exc).split()[1])
        except (IndexError, ValueError):
            pass
        raise SingularMatrixError(str(exc), pivot=pivot) from exc
    return xs, {"min_pivot": min_piv, "det": det}


def determinant(A):
    _, report = solve_dense_multi(A, [])
    return report["det"]


def matmul_vec(A, x):
    out = []
    for row in A:
        acc = mpfr(0)
        for j in range(len(x)):
            acc = acc + row[j] * x[j]
        out.append(acc)
    return out


def inf_norm_matrix(A):
    best = mpfr(0)
    for row in A:
        acc = mpfr(0)
        for v in row:
            acc = acc + abs(v)
        if acc > best:
            best = acc
    return best


def inf_norm_vec(x):
    best = mpfr(0)
    for v in x:
        av = abs(v)
        if av > best:
            best = av
    return best


def condition_inf(A):
    """Exact infinity-norm condition number via a full inverse solve."""
    n = len(A)
    eye = [[mpfr(1) if i == j else mpfr(0) for j in range(n)] for i in range(n)]
    cols, _ = solve_dense_multi(A, eye)
    # cols[j][i] is entry (i, j) of the inverse
    inv_norm = mpfr(0)
    for i in range(n):
        acc = mpfr(0)
        for j in range(n):
            acc = acc + abs(cols[j][i])
        if acc > inv_norm:
            inv_norm = acc
    return inf_norm_matrix(A) * inv_norm


def solve_least_squares(A, y):
    """Householder QR least-squares for an overdetermined system."""
    m = len(A)
    n = len(A[0])
    if m < n:
        raise ValidationError("least squares needs at least as many rows as columns")
    R = [list(row) for row in A]
    b = list(y)
    for col in range(n):
        # Householder vector for column col
        sigma = mpfr(0)
        for r in range(col, m):
            sigma = sigma + R[r][col] * R[r][col]
        norm = gmpy2.sqrt(sigma)
        if norm == 0:
            raise SingularMatrixError("rank-deficient least-squares column %d" % col)
        alpha = -norm if R[col][col] >= 0 else norm
        v = [mpfr(0)] * m
        v[col] = R[col][col] - alpha
        for r in range(col + 1, m):
            v[r] = R[r][col]
        vtv = mpfr(0)
        for r in range(col, m):
            vtv = vtv + v[r] * v[r]
        if vtv == 0:
            continue
        R[col][col] = alpha
        for r in range(col + 1, m):
            R[r][col] = mpfr(0)
        for c2 in range(col + 1, n):
            dot = mpfr(0)
            for r in range(col, m):
                dot = dot + v[r] * R[r][c2]
            f = 2 * dot / vtv
            for r in range(col, m):
                R[r][c2] = R[r][c2] - f * v[r]
        dot = mpfr(0)
        for r in range(col, m):
            dot = dot + v[r] * b[r]
        f = 2 * dot / vtv
        for r in range(col, m):
            b[r] = b[r] - f * v[r]
    x = [mpfr(0)] * n
    for r in range(n - 1, -1, -1):
        acc = b[r]
        for c2 in range(r + 1, n):
            acc = acc - R[r][c2] * x[c2]
        x[r] = acc / R[r][r]
    return x
