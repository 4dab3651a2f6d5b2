"""Density synthesis from moments and convergence studies.

The synthesis at a point x weights the moment rectangle by an alternating
double sum; algebraically it equals smoothing the density with a pair of
beta kernels whose means approach x at rate 1/(n+2). The alternating sum
cancels catastrophically as orders grow (the reason the whole toolkit
runs in extended precision), so a cancellation monitor reports the
largest intermediate term alongside each value.
"""

import time
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from . import momentsys, radon
from .backend import get_backend
from .density import moment_triangle
from .errors import DomainError, IncompleteMomentsError, ValidationError
from .mollifier import MollifierSpec
from .numerics import GL_NODES, binomial_int, integrate_1d
from .precision import auto_quad_tol, current_precision, ensure_real

BETA_TOL = "1e-30"


def _floor_index(m, x):
    mu = int(gmpy2.floor(mpfr(m) * x))
    if mu > m:
        mu = m
    if mu < 0:
        mu = 0
    return mu


def _check_point(x):
    x1 = ensure_real(x[0])
    x2 = ensure_real(x[1])
    if x1 < 0 or x1 > 1 or x2 < 0 or x2 > 1:
        raise DomainError("synthesis point (%s, %s) outside the unit square" % (x1, x2))
    return x1, x2


def ml_value_ex(t, m, n, x):
    """Moment synthesis at x; returns (value, max_term monitor)."""
    if m < 0 or n < 0:
        raise DomainError("orders must be nonnegative")
    if t.max_order < m + n:
        raise IncompleteMomentsError(
            "triangle order %d cannot cover the (%d, %d) moment rectangle"
            % (t.max_order, m, n),
            missing=[(m, n)],
        )
    x1, x2 = _check_point(x)
    mu = _floor_index(m, x1)
    nu = _floor_index(n, x2)
    gam = [
        [t.get(mu + a1, nu + a2) for a2 in range(n - nu + 1)]
        for a1 in range(m - mu + 1)
    ]
    return get_backend().ml_sum(gam, m, n, mu, nu, current_precision())


def ml_value(t, m, n, x):
    """Moment synthesis of the density at a point of the unit square."""
    return ml_value_ex(t, m, n, x)[0]


def _beta_weight(order, idx):
    """Beta density t^idx (1-t)^(order-idx) with its exact normalization."""
    norm = gmpy2.fac(order + 1) // (gmpy2.fac(idx) * gmpy2.fac(order - idx))

    def beta(u):
        return mpfr(norm) * u**idx * (1 - u) ** (order - idx)

    return beta


def _poly_degree(d):
    if d.kind == "uniform":
        return 0
    if d.kind == "monomial":
        return d.params[0] + d.params[1]
    if d.kind == "poly":
        return max(a + b for a, b, _ in d.params[0])
    return None


def beta_kernel_value(d, m, n, x, tol=BETA_TOL):
    """Smoothing-kernel form of the synthesis: the independent oracle.

    Integrates the density against the two beta kernels by quadrature
    (tensorized; separable densities factor into two 1-D integrals).
    Stays in the pure-Python quadrature path by design: it is the check
    on ml_value, never a consumer of the same kernels.
    """
    if m < 0 or n < 0:
        raise DomainError("orders must be nonnegative")
    x1, x2 = _check_point(x)
    tol = ensure_real(tol)
    mu = _floor_index(m, x1)
    nu = _floor_index(n, x2)
    beta1 = _beta_weight(m, mu)
    beta2 = _beta_weight(n, nu)
    deg = _poly_degree(d)
    zero = mpfr(0)
    one = mpfr(1)
    if d.kind in ("uniform", "monomial", "bumpprod"):
        # separable: split into the two coordinate factors
        if d.kind == "uniform":
            fx = lambda u: d.params[0]
            fy = lambda u: mpfr(1)
        elif d.kind == "monomial":
            a, b, scale = d.params
            fx = lambda u: scale * u**a if a else scale
            fy = lambda u: u**b if b else mpfr(1)
        else:
            cx, cy, w, amp = d.params

            def bump1(u, c0=cx):
                v = (u - c0) / w
                v2 = v * v
                if v2 >= 1:
                    return mpfr(0)
                return gmpy2.exp(-1 / (1 - v2))

            fx = lambda u: amp * bump1(u)
            fy = lambda u: bump1(u, cy)
        n1 = GL_NODES if deg is None else max(GL_NODES, (m + deg) // 2 + 2)
        n2 = GL_NODES if deg is None else max(GL_NODES, (n + deg) // 2 + 2)
        ix = integrate_1d(lambda u: fx(u) * beta1(u), (zero, one), tol, n_nodes=n1)
        iy = integrate_1d(lambda u: fy(u) * beta2(u), (zero, one), tol, n_nodes=n2)
        return ix * iy
    nn = GL_NODES if deg is None else max(GL_NODES, (max(m, n) + deg) // 2 + 2)

    def outer(u):
        def inner(v):
            return d.eval(u, v) * beta2(v)

        return integrate_1d(inner, (zero, one), tol, n_nodes=nn) * beta1(u)

    return integrate_1d(outer, (zero, one), tol, n_nodes=nn)


@dataclass(frozen=True)
class ReconstructionGrid:
    """Synthesis values on a uniform grid over the unit square."""

    xs: tuple
    ys: tuple
    values: tuple
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return (len(self.xs), len(self.ys))


def grid_nodes(count):
    """count uniform nodes on [0,1] incl. endpoints; a single node sits at 1."""
    if count < 1:
        raise ValidationError("grid resolution must be at least 1")
    if count == 1:
        return [mpfr(1)]
    return [mpfr(i) / (count - 1) for i in range(count)]


def reconstruct_grid(t, m, n, resolution, meta=None):
    """Evaluate the moment synthesis on a uniform grid."""
    if isinstance(resolution, int):
        resolution = (resolution, resolution)
    g1, g2 = resolution
    xs = grid_nodes(g1)
    ys = grid_nodes(g2)
    values = []
    max_term = mpfr(0)
    worst_ratio = mpfr(0)
    for x1 in xs:
        row = []
        for x2 in ys:
            v, mt = ml_value_ex(t, m, n, (x1, x2))
            if mt > max_term:
                max_term = mt
            if v != 0:
                ratio = mt / abs(v)
                if ratio > worst_ratio:
                    worst_ratio = ratio
            row.append(v)
        values.append(tuple(row))
    info = {
        "m": m,
        "n": n,
        "source": t.source,
        "cancellation_max_term": float(max_term),
        "cancellation_worst_ratio": float(worst_ratio),
    }
    if meta:
        info.update(meta)
    return ReconstructionGrid(tuple(xs), tuple(ys), tuple(values), info)


def sup_error(g, d):
    """Max absolute node error of a reconstruction against a density."""
    best = mpfr(0)
    for i, x1 in enumerate(g.xs):
        for j, x2 in enumerate(g.ys):
            e = abs(g.values[i][j] - d.eval(x1, x2))
            if e > best:
                best = e
    return best


def choose_h(n, big_c, c1):
    """Smoothing bandwidth balancing the h^2 bias against the 1/(n+2) rate."""
    big_c = ensure_real(big_c)
    c1 = ensure_real(c1)
    if not (big_c > 0 and c1 > 0):
        raise ValidationError("rate constants must be positive")
    if n < 0:
        raise DomainError("order must be nonnegative")
    return gmpy2.sqrt((big_c / c1) / (n + 2))


def _poly_terms(d):
    if d.kind == "uniform":
        return ((0, 0, d.params[0]),)
    if d.kind == "monomial":
        a, b, s = d.params
        return ((a, b, s),)
    if d.kind == "poly":
        return d.params[0]
    raise ValidationError(
        "closed-form derivative norms available for polynomial densities only"
    )


def _poly_derivative(terms, dx, dy):
    out = []
    for a, b, c in terms:
        if a < dx or b < dy:
            continue
        f = mpfr(1)
        for i in range(dx):
            f = f * (a - i)
        for i in range(dy):
            f = f * (b - i)
        out.append((a - dx, b - dy, c * f))
    return tuple(out)


def _poly_sup(terms):
    # valid for nonnegative coefficients: the sup on [0,1]^2 sits at (1,1)
    if any(c < 0 for _, _, c in terms):
        raise ValidationError("derivative sup-norm shortcut needs nonnegative coefficients")
    acc = mpfr(0)
    for _, _, c in terms:
        acc = acc + c
    return acc


def derivative_sup_norms(d):
    """Sup norms of the first and second partials for polynomial kinds."""
    terms = _poly_terms(d)
    return {
        "f10": _poly_sup(_poly_derivative(terms, 1, 0)),
        "f01": _poly_sup(_poly_derivative(terms, 0, 1)),
        "f20": _poly_sup(_poly_derivative(terms, 2, 0)),
        "f11": _poly_sup(_poly_derivative(terms, 1, 1)),
        "f02": _poly_sup(_poly_derivative(terms, 0, 2)),
    }


def rate_constant(d):
    """Plain-synthesis rate constant: 2(|f10|+|f01|) + (|f20|+|f11|+|f02|)/2."""
    n = derivative_sup_norms(d)
    return 2 * (n["f10"] + n["f01"]) + (n["f20"] + n["f11"] + n["f02"]) / 2


def smoothing_constant(d, m):
    """Second-order bias constant of the diagonal smoothing, per unit h^2.

    The 1-D kernel smears along the diagonal direction, so the second
    derivative along that direction enters: (sigma^2/2)(|f20| + 2|f11| +
    |f02|), sigma^2 the unit-bandwidth kernel variance.
    """
    n = derivative_sup_norms(d)
    return m.variance() / 2 * (n["f20"] + 2 * n["f11"] + n["f02"])


@dataclass(frozen=True)
class StudyRow:
    order: int
    sup_error: object
    slope_vs_prev: float
    runtime_ms: float


@dataclass(frozen=True)
class StudyResult:
    rows: tuple
    fitted_slope: float
    meta: dict

    def errors(self):
        return [r.sup_error for r in self.rows]


def _fit_slope(orders, errors):
    import math

    xs = [math.log(o) for o in orders]
    ys = [math.log(float(e)) for e in errors]
    nsz = len(xs)
    xm = sum(xs) / nsz
    ym = sum(ys) / nsz
    num = sum((x - xm) * (y - ym) for x, y in zip(xs, ys))
    den = sum((x - xm) ** 2 for x in xs)
    return num / den if den else float("nan")


def convergence_study(
    d,
    orders,
    angle_count=radon.DEFAULT_ANGLE_COUNT,
    resolution=51,
    tol=None,
    least_squares=False,
    mollifier_family=None,
    mollifier_h=None,
    rate_constants=None,
):
    """Full-pipeline sup-error study over ascending synthesis orders m=n.

    Moments are recovered through the continuous path per order (triangle
    order 2n), optionally routed through the smoothing transfer and its
    inversion when a mollifier family is configured: mollifier_h may be a
    number, or None with rate_constants=(C, C1) to pick h per order from
    the bias/rate balance.
    """
    orders = list(orders)
    if orders != sorted(orders) or len(set(orders)) != len(orders):
        raise ValidationError("orders must be ascending and distinct")
    if not orders:
        raise ValidationError("need at least one order")
    angles = radon.default_angles(angle_count)
    rows = []
    prev = None
    for n in orders:
        t0 = time.perf_counter()
        kmax = 2 * n
        ms = momentsys.continuous_moments(d, angles, kmax, tol=tol)
        used_h = None
        if mollifier_family is not None:
            if mollifier_h is not None:
                used_h = ensure_real(mollifier_h)
            else:
                if rate_constants is None:
                    raise ValidationError(
                        "need mollifier_h or rate_constants to size the bandwidth"
                    )
                used_h = choose_h(n, rate_constants[0], rate_constants[1])
            spec = MollifierSpec(mollifier_family, used_h, max_order=kmax)
            ms = momentsys.hatb_to_b(momentsys.transfer_hatb(ms, spec), spec)
        tri, _ = momentsys.recover_triangle(
            ms, kmax, least_squares=least_squares, with_condition=False
        )
        grid = reconstruct_grid(tri, n, n, resolution, meta={"h": used_h})
        err = sup_error(grid, d)
        ms_elapsed = (time.perf_counter() - t0) * 1000.0
        slope = float("nan")
        if prev is not None:
            import math

            slope = math.log(float(err) / float(prev[1])) / math.log(n / prev[0])
        rows.append(StudyRow(n, err, slope, ms_elapsed))
        prev = (n, err)
    fitted = _fit_slope([r.order for r in rows], [r.sup_error for r in rows]) if len(rows) > 1 else float("nan")
    meta = {
        "density": d.name,
        "angle_count": angle_count,
        "resolution": resolution,
        "least_squares": least_squares,
        "mollifier_family": mollifier_family,
    }
    return StudyResult(tuple(rows), fitted, meta)
