"""Moment extraction and the two linear inversions.

Offset moments of a sinogram, b_k(theta) = int Rf(theta,p) p^k dp, are
degree-k homogeneous polynomials in (cos theta, sin theta) whose
coefficients are the density moments. Recovering those coefficients is a
(k+1)-point angular solve per order; undoing sinogram smoothing first is
a unit-diagonal lower-triangular solve per angle mixing moment orders.
"""

from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from . import gauss
from .backend import get_backend
from .density import MomentTriangle
from .errors import (
    DomainError,
    MollifierStateError,
    QuadratureError,
    TruncationError,
    ValidationError,
)
from .mollifier import mollifier_moment
from .numerics import (
    GL_NODES,
    binomial_int,
    condition_inf,
    solve_dense_multi,
    solve_least_squares,
    solve_lower_triangular,
)
from .precision import auto_quad_tol, current_precision, ensure_real
from .radon import corner_splits

TRUNCATION_RATIO = "1e-3"


@dataclass(frozen=True)
class MomentSet:
    """Offset moments value[k][i] = b_k(theta_i) for k = 0..max_order.

    kind is "raw" for plain-transform moments, "mollified" for moments of
    the smoothed transform.
    """

    kind: str
    max_order: int
    angles: tuple
    values: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("raw", "mollified"):
            raise ValidationError("moment-set kind must be raw or mollified")
        if len(self.values) != self.max_order + 1:
            raise ValidationError("moment table incomplete (orders)")
        n = len(self.angles)
        if any(len(row) != n for row in self.values):
            raise ValidationError("moment table incomplete (angles)")

    def column(self, i):
        """All orders at one angle, as a list b_0..b_K."""
        return [self.values[k][i] for k in range(self.max_order + 1)]


def _outer_nodes(kmax):
    """Outer rule order: exact for p^kmax times a cubic chord profile."""
    return max(GL_NODES, kmax // 2 + 12)


def continuous_moments(d, angles, kmax, tol=None):
    """High-accuracy raw moments by adaptive quadrature of the transform.

    Separates discretization error from method error: no offset grid is
    involved. The p-integral is split at the square-corner projections,
    where the transform loses smoothness.
    """
    if kmax < 0:
        raise DomainError("moment order must be nonnegative")
    angles = [ensure_real(t) for t in angles]
    prec = current_precision()
    if tol is None:
        tol = auto_quad_tol(prec)
    else:
        tol = ensure_real(tol)
    chord_tol = tol * mpfr(2) ** -40
    floor = mpfr(2) ** -(prec - 8)
    if chord_tol < floor:
        chord_tol = floor
    nodes_c, weights_c = gauss.nodes_weights(GL_NODES)
    nodes_o, weights_o = gauss.nodes_weights(_outer_nodes(kmax))
    backend = get_backend()
    desc = d.descriptor()
    cols = []
    for theta in angles:
        splits = corner_splits(theta)
        col, defect = backend.radon_moment_vector(
            desc, theta, kmax, prec, tol, chord_tol, splits,
            nodes_c, weights_c, nodes_o, weights_o,
        )
        if defect > tol * (kmax + 1):
            raise QuadratureError(
                "moment quadrature stalled at angle %s (defect %s)" % (theta, defect),
                achieved=defect,
                requested=tol,
            )
        cols.append(col)
    values = tuple(tuple(cols[i][k] for i in range(len(angles))) for k in range(kmax + 1))
    meta = {"source": "continuous", "density": d.name, "tol": tol}
    return MomentSet("raw", kmax, tuple(angles), values, meta)


def sinogram_moments(s, kmax):
    """Trapezoid offset moments of a stored sinogram, all orders <= kmax.

    Fails when the outermost offsets still carry signal (support
    truncation): boundary magnitude above 1e-3 of the row maximum.
    """
    if kmax < 0:
        raise DomainError("moment order must be nonnegative")
    m = len(s.offsets)
    for i, row in enumerate(s.values):
        rowmax = mpfr(0)
        for v in row:
            av = abs(v)
            if av > rowmax:
                rowmax = av
        boundary = abs(row[0])
        last = abs(row[m - 1])
        if last > boundary:
            boundary = last
        if rowmax > 0 and boundary > mpfr(TRUNCATION_RATIO) * rowmax:
            raise TruncationError(
                "sinogram support truncated at angle index %d "
                "(boundary %.3e vs max %.3e)" % (i, float(boundary), float(rowmax))
            )
    prec = current_precision()
    backend = get_backend()
    cols = [
        backend.trapezoid_moments(list(row), list(s.offsets), kmax, s.step, prec)
        for row in s.values
    ]
    values = tuple(tuple(cols[i][k] for i in range(len(s.angles))) for k in range(kmax + 1))
    kind = "mollified" if s.mollifier is not None else "raw"
    meta = {"source": "grid", "density": s.density_id, "mollifier": s.mollifier}
    return MomentSet(kind, kmax, s.angles, values, meta)


def build_C(k, m):
    """Unit-diagonal lower-triangular transfer matrix of order k+1.

    Row r encodes: smoothed moment of order r = sum_j C(r,j) c_j times
    raw moment of order r-j; entry [r][r-j] = C(r,j) c_j.
    """
    if k < 0:
        raise DomainError("order must be nonnegative")
    rows = []
    for r in range(k + 1):
        row = [mpfr(0)] * (k + 1)
        for j in range(r + 1):
            cj = mollifier_moment(m, j)
            if cj == 0 and j:
                continue
            row[r - j] = mpfr(binomial_int(r, j)) * cj
        rows.append(row)
    return rows


def transfer_hatb(ms, m):
    """Forward synthesis of smoothed moments from raw ones (exact map)."""
    if ms.kind != "raw":
        raise MollifierStateError("transfer synthesis expects raw moments")
    kmax = ms.max_order
    n = len(ms.angles)
    cs = [mollifier_moment(m, j) for j in range(kmax + 1)]
    values = []
    for k in range(kmax + 1):
        row = []
        for i in range(n):
            acc = mpfr(0)
            for j in range(0, k + 1, 2):
                acc = acc + mpfr(binomial_int(k, j)) * cs[j] * ms.values[k - j][i]
            row.append(acc)
        values.append(tuple(row))
    meta = dict(ms.meta)
    meta["mollifier"] = m.descriptor()
    return MomentSet("mollified", kmax, ms.angles, tuple(values), meta)


def hatb_to_b(ms, m):
    """Undo smoothing in moment space: one triangular solve per angle."""
    if ms.kind != "mollified":
        raise MollifierStateError("hatb_to_b expects mollified moments")
    kmax = ms.max_order
    C = build_C(kmax, m)
    cols = [solve_lower_triangular(C, ms.column(i)) for i in range(len(ms.angles))]
    values = tuple(
        tuple(cols[i][k] for i in range(len(ms.angles))) for k in range(kmax + 1)
    )
    meta = dict(ms.meta)
    meta["unmollified_from"] = m.descriptor()
    meta["mollifier"] = None
    return MomentSet("raw", kmax, ms.angles, values, meta)


def build_A(k, angles):
    """Angular system matrix: [i][j] = C(k,j) cos^j sin^(k-j) at theta_i."""
    if k < 0:
        raise DomainError("order must be nonnegative")
    angles = [ensure_real(t) for t in angles]
    seen = set()
    for t in angles:
        key = gmpy2.to_binary(t)
        if key in seen:
            raise ValidationError("duplicate angle %s" % t)
        seen.add(key)
    binoms = [mpfr(binomial_int(k, j)) for j in range(k + 1)]
    rows = []
    for t in angles:
        c = gmpy2.cos(t)
        s = gmpy2.sin(t)
        if s == 0:
            raise ValidationError("angle %s has sin(theta) = 0" % t)
        rows.append([binoms[j] * c**j * s ** (k - j) for j in range(k + 1)])
    return rows


def spread_indices(n, k):
    """k+1 angle indices maximally spread over an n-angle grid."""
    if n < k + 1:
        raise ValidationError("order %d needs at least %d distinct angles, have %d" % (k, k + 1, n))
    return [i * n // (k + 1) for i in range(k + 1)]


def solve_order(ms, k, angle_indices=None, least_squares=False, with_condition=True):
    """Recover the order-k moment row {gamma_{j,k-j}} from raw moments.

    Square solve on k+1 spread angles by default; least_squares fits all
    angles. Returns (row dict, info) with the condition number of the
    square system when requested.
    """
    if ms.kind != "raw":
        raise ValidationError("solve_order expects raw moments")
    if k > ms.max_order:
        raise DomainError("order %d beyond moment set order %d" % (k, ms.max_order))
    n = len(ms.angles)
    info = {"order": k, "mode": "least-squares" if least_squares else "square"}
    if least_squares:
        A = build_A(k, ms.angles)
        rhs = list(ms.values[k])
        x = solve_least_squares(A, rhs)
        info["condition"] = None
    else:
        idx = spread_indices(n, k) if angle_indices is None else list(angle_indices)
        if len(idx) != k + 1 or len(set(idx)) != k + 1:
            raise ValidationError("need exactly k+1 distinct angle indices")
        sel = [ms.angles[i] for i in idx]
        A = build_A(k, sel)
        rhs = [ms.values[k][i] for i in idx]
        xs, rep = solve_dense_multi(A, [rhs])
        x = xs[0]
        info["min_pivot"] = rep["min_pivot"]
        if with_condition:
            info["condition"] = condition_inf(A)
    row = {(j, k - j): x[j] for j in range(k + 1)}
    return row, info


def recover_triangle(ms, kmax=None, least_squares=False, with_condition=True):
    """Assemble the full moment triangle from raw sinogram moments."""
    if kmax is None:
        kmax = ms.max_order
    if kmax > ms.max_order:
        raise DomainError("triangle order %d beyond moment set order %d" % (kmax, ms.max_order))
    values = {}
    infos = []
    for k in range(kmax + 1):
        row, info = solve_order(ms, k, least_squares=least_squares, with_condition=with_condition)
        values.update(row)
        infos.append(info)
    tri = MomentTriangle(kmax, values, source=str(ms.meta.get("density", "")))
    return tri, {"orders": infos}


def homogeneity_fit(ms, k):
    """Fit b_k(theta) to a degree-k homogeneous polynomial over all angles.

    Returns (relative l2 residual, coefficient vector). Raw noiseless
    moments fit exactly up to quadrature error; the residual is the
    operational test of that structure.
    """
    if ms.kind != "raw":
        raise ValidationError("homogeneity fit expects raw moments")
    A = build_A(k, ms.angles)
    rhs = list(ms.values[k])
    x = solve_least_squares(A, rhs)
    rnorm = mpfr(0)
    bnorm = mpfr(0)
    for i in range(len(rhs)):
        acc = mpfr(0)
        for j in range(k + 1):
            acc = acc + A[i][j] * x[j]
        r = acc - rhs[i]
        rnorm = rnorm + r * r
        bnorm = bnorm + rhs[i] * rhs[i]
    if bnorm == 0:
        return mpfr(0), x
    return gmpy2.sqrt(rnorm / bnorm), x


def mollified_moment_of(t, m, theta, k):
    """Smoothed-transform moment synthesized from a moment triangle.

    Combines the homogeneous expansion of raw moments with the binomial
    transfer by the kernel's signed moments.
    """
    if k > t.max_order:
        raise DomainError("order %d beyond triangle order %d" % (k, t.max_order))
    theta = ensure_real(theta)
    c = gmpy2.cos(theta)
    s = gmpy2.sin(theta)
    acc = mpfr(0)
    for j in range(0, k + 1, 2):
        cj = mollifier_moment(m, j)
        i = k - j
        bi = mpfr(0)
        for ell in range(i + 1):
            bi = bi + mpfr(binomial_int(i, ell)) * c**ell * s ** (i - ell) * t.get(ell, i - ell)
        acc = acc + mpfr(binomial_int(k, j)) * cj * bi
    return acc


def synthesis_residual(t, m, theta, k, observed):
    """Consistency defect of a recovered triangle against smoothed data.

    observed is a measured (or independently computed) k-th offset moment
    of the smoothed transform at this angle; the residual vanishes exactly
    when the triangle reproduces it and responds linearly to any moment
    perturbation (the gamma_{0,0} coefficient is c_k).
    """
    return mollified_moment_of(t, m, theta, k) - ensure_real(observed)
