"""Target densities on the unit square and their moment oracle.

Registry members carry closed-form moments (polynomials) or a cheap
separable quadrature (the product bump), giving the pipeline an
independent ground truth to validate against. Grid-sampled densities are
bilinear interpolants loaded from CSV; their moments integrate the
interpolant itself so the oracle stays self-consistent.
"""

import csv
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from .backend import get_backend
from .errors import DomainError, IncompleteMomentsError, ValidationError
from .numerics import GL_NODES, integrate_1d
from .precision import current_precision, ensure_real, real

MOMENT_TOL = "1e-30"


@dataclass(frozen=True)
class Density:
    """Evaluable density supported on [0,1]^2.

    kind is one of uniform / monomial / poly / bumpprod / bilinear; params
    matches the kernel descriptor layout for that kind (see _kernels_py).
    """

    kind: str
    params: tuple
    name: str = "custom"

    def descriptor(self):
        return (self.kind,) + self.params

    def eval(self, x1, x2):
        """Density value; exactly zero outside the unit square."""
        x1 = ensure_real(x1)
        x2 = ensure_real(x2)
        if x1 < 0 or x1 > 1 or x2 < 0 or x2 > 1:
            return mpfr(0)
        from ._kernels_py import _density_eval

        return _density_eval(self.descriptor(), x1, x2)

    def mass(self):
        return self.moment(0, 0)

    def moment(self, a1, a2):
        """True moment: integral of x1^a1 x2^a2 times the density."""
        return true_moment(self, a1, a2)

    def normalized(self):
        """Copy scaled to unit mass."""
        m = self.mass()
        if not m > 0:
            raise DomainError("cannot normalize density with mass %s" % m)
        return scale_density(self, 1 / m, name=self.name + "-normalized")


def scale_density(d, factor, name=None):
    factor = ensure_real(factor)
    name = name or d.name
    if d.kind == "uniform":
        return Density("uniform", (d.params[0] * factor,), name)
    if d.kind == "monomial":
        a, b, s = d.params
        return Density("monomial", (a, b, s * factor), name)
    if d.kind == "poly":
        terms = tuple((a, b, c * factor) for a, b, c in d.params[0])
        return Density("poly", (terms,), name)
    if d.kind == "bumpprod":
        cx, cy, w, amp = d.params
        return Density("bumpprod", (cx, cy, w, amp * factor), name)
    if d.kind == "bilinear":
        nx, ny, vals = d.params
        return Density("bilinear", (nx, ny, tuple(v * factor for v in vals)), name)
    raise ValidationError("unknown density kind %r" % d.kind)


def uniform():
    return Density("uniform", (mpfr(1),), "uniform")


def monomial(a, b, scale=1):
    if a < 0 or b < 0:
        raise DomainError("monomial exponents must be nonnegative")
    name = "x^%d y^%d" % (a, b)
    return Density("monomial", (int(a), int(b), ensure_real(scale)), name)


def polynomial(terms, name="poly"):
    """terms: iterable of (a, b, coefficient)."""
    tt = tuple((int(a), int(b), ensure_real(c)) for a, b, c in terms)
    if not tt:
        raise ValidationError("polynomial needs at least one term")
    if any(a < 0 or b < 0 for a, b, _ in tt):
        raise DomainError("polynomial exponents must be nonnegative")
    return Density("poly", (tt,), name)


def product_bump(center=("0.5", "0.5"), halfwidth="0.5", amplitude=1):
    cx, cy = ensure_real(center[0]), ensure_real(center[1])
    w = ensure_real(halfwidth)
    if not w > 0:
        raise DomainError("bump halfwidth must be positive")
    return Density("bumpprod", (cx, cy, w, ensure_real(amplitude)), "bump")


def from_grid(values, name="grid"):
    """Bilinear density from a uniform grid of samples over [0,1]^2.

    values[i][j] is the sample at (i/(nx-1), j/(ny-1)).
    """
    nx = len(values)
    ny = len(values[0]) if nx else 0
    if nx < 2 or ny < 2:
        raise ValidationError("grid density needs at least a 2x2 grid")
    if any(len(row) != ny for row in values):
        raise ValidationError("ragged grid")
    flat = []
    for row in values:
        for v in row:
            v = ensure_real(v)
            if v < 0:
                raise ValidationError("grid density values must be nonnegative")
            flat.append(v)
    return Density("bilinear", (nx, ny, tuple(flat)), name)


def load_grid_csv(path, name=None):
    """Load a grid density from CSV with header x1,x2,value (row-major)."""
    xs, ys, vals = [], [], {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["x1", "x2", "value"]:
            raise ValidationError("grid CSV must start with header x1,x2,value")
        for row in reader:
            if not row:
                continue
            x1, x2, v = (mpfr(c.strip()) for c in row[:3])
            if x1 not in xs:
                xs.append(x1)
            if x2 not in ys:
                ys.append(x2)
            vals[(x1, x2)] = v
    xs.sort()
    ys.sort()
    if len(xs) < 2 or len(ys) < 2 or len(vals) != len(xs) * len(ys):
        raise ValidationError("grid CSV does not form a full uniform grid")
    grid = [[vals[(x1, x2)] for x2 in ys] for x1 in xs]
    return from_grid(grid, name or str(path))


_REGISTRY_BUILDERS = {
    "uniform": uniform,
    "x": lambda: monomial(1, 0),
    "y": lambda: monomial(0, 1),
    "xy": lambda: monomial(1, 1),
    "x2y3": lambda: monomial(2, 3),
    "mix": lambda: polynomial([(0, 0, mpfr(1) / 2), (2, 1, mpfr(1))], name="mix"),
    "bump": product_bump,
}


def registry_ids():
    return sorted(_REGISTRY_BUILDERS)


def from_registry(name):
    try:
        d = _REGISTRY_BUILDERS[name]()
    except KeyError:
        raise ValidationError(
            "unknown density %r (registry: %s)" % (name, ", ".join(registry_ids()))
        ) from None
    return Density(d.kind, d.params, name)


def _bump_1d_moment(c, w, order):
    """Integral of t^order * g((t-c)/w) over [0,1], g the unit bump."""
    lo = c - w if c - w > 0 else mpfr(0)
    hi = c + w if c + w < 1 else mpfr(1)
    if not lo < hi:
        return mpfr(0)

    def f(t):
        u = (t - c) / w
        u2 = u * u
        if u2 >= 1:
            return mpfr(0)
        g = gmpy2.exp(-1 / (1 - u2))
        return t**order * g if order else g

    return integrate_1d(f, (lo, hi), mpfr(MOMENT_TOL))


def true_moment(d, a1, a2):
    """gamma_{a1,a2} = integral of x1^a1 x2^a2 times the density.

    Closed form for polynomial kinds; separable quadrature for the bump;
    tensorized quadrature of the interpolant for grid densities.
    """
    if a1 < 0 or a2 < 0:
        raise DomainError("moment orders must be nonnegative")
    if d.kind == "uniform":
        return d.params[0] / ((a1 + 1) * (a2 + 1))
    if d.kind == "monomial":
        a, b, s = d.params
        return s / mpfr((a1 + a + 1) * (a2 + b + 1))
    if d.kind == "poly":
        acc = mpfr(0)
        for a, b, c in d.params[0]:
            acc = acc + c / mpfr((a1 + a + 1) * (a2 + b + 1))
        return acc
    if d.kind == "bumpprod":
        cx, cy, w, amp = d.params
        return amp * _bump_1d_moment(cx, w, a1) * _bump_1d_moment(cy, w, a2)
    if d.kind == "bilinear":
        nx, ny, _ = d.params
        xcuts = [mpfr(i) / (nx - 1) for i in range(1, nx - 1)]
        ycuts = [mpfr(j) / (ny - 1) for j in range(1, ny - 1)]
        desc = d.descriptor()
        from ._kernels_py import _density_eval

        def outer(x1):
            def inner(x2):
                return x1**a1 * x2**a2 * _density_eval(desc, x1, x2)

            return integrate_1d(inner, (mpfr(0), mpfr(1)), mpfr(MOMENT_TOL), splits=ycuts)

        return integrate_1d(outer, (mpfr(0), mpfr(1)), mpfr(MOMENT_TOL), splits=xcuts)
    raise ValidationError("unknown density kind %r" % d.kind)


@dataclass(frozen=True)
class MomentTriangle:
    """Complete moment table gamma_{a,b} for all a+b <= max_order."""

    max_order: int
    values: dict = field(default_factory=dict)
    source: str = ""

    def __post_init__(self):
        missing = [
            (a, b)
            for k in range(self.max_order + 1)
            for a in range(k + 1)
            for b in (k - a,)
            if (a, b) not in self.values
        ]
        if missing:
            raise IncompleteMomentsError(
                "moment triangle incomplete up to order %d" % self.max_order,
                missing=missing,
            )
        for v in self.values.values():
            if not gmpy2.is_finite(v):
                raise ValidationError("non-finite moment in triangle")

    def get(self, a, b):
        try:
            return self.values[(a, b)]
        except KeyError:
            raise IncompleteMomentsError(
                "moment (%d, %d) missing (triangle order %d)" % (a, b, self.max_order),
                missing=[(a, b)],
            ) from None

    def mass(self):
        return self.get(0, 0)

    def perturbed(self, a, b, delta):
        vals = dict(self.values)
        vals[(a, b)] = vals[(a, b)] + ensure_real(delta)
        return MomentTriangle(self.max_order, vals, self.source + "-perturbed")


def moment_triangle(d, max_order):
    """True moments of the density for every order a+b <= max_order."""
    if max_order < 0:
        raise DomainError("max_order must be nonnegative")
    if d.kind == "bumpprod":
        # separable: cache the two 1-D moment sequences
        cx, cy, w, amp = d.params
        mx = [_bump_1d_moment(cx, w, a) for a in range(max_order + 1)]
        my = [_bump_1d_moment(cy, w, b) for b in range(max_order + 1)]
        vals = {}
        for k in range(max_order + 1):
            for a in range(k + 1):
                vals[(a, k - a)] = amp * mx[a] * my[k - a]
        return MomentTriangle(max_order, vals, d.name)
    vals = {}
    for k in range(max_order + 1):
        for a in range(k + 1):
            vals[(a, k - a)] = true_moment(d, a, k - a)
    return MomentTriangle(max_order, vals, d.name)
