"""Symmetric smoothing kernels and sinogram smoothing in the offset variable.

A family member is the unit-bandwidth profile scaled by h:
phi_h(t) = phi(t/h)/h, supported on [-h, h], unit integral, even. Its
signed moment sequence c_j = (-1)^j * int t^j phi_h(t) dt drives the
triangular moment transfer downstream; evenness makes c_j vanish for odd
j and h-scaling gives c_j(phi_h) = h^j c_j(phi) exactly.
"""

from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from . import gauss
from .backend import get_backend
from .errors import (
    DomainError,
    MollifierStateError,
    SupportOverflowError,
    ValidationError,
)
from .numerics import GL_NODES, integrate_1d
from .precision import current_precision, ensure_real
from .radon import Sinogram, corner_splits, radon_eval

MOMENT_TOL = "1e-30"
DEFAULT_MAX_ORDER = 64

FAMILIES = ("bump", "tgauss")


def _profile(family, u2):
    """Unnormalized unit profile evaluated from u^2 (u in (-1, 1))."""
    if family == "bump":
        return gmpy2.exp(-1 / (1 - u2))
    return gmpy2.exp(-u2 / 2)


@dataclass(frozen=True)
class MollifierSpec:
    """One family member: profile, bandwidth, normalization, moments.

    Immutable after construction; the moment cache is filled eagerly up
    to max_order, so instances are safe to share across threads.
    """

    family: str
    h: object
    max_order: int = DEFAULT_MAX_ORDER
    amplitude: object = field(init=False, default=None)
    _base_moments: tuple = field(init=False, default=())
    precision: int = field(init=False, default=0)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(
                "unknown mollifier family %r (choose from %s)" % (self.family, FAMILIES)
            )
        h = ensure_real(self.h)
        if not h > 0:
            raise DomainError("bandwidth must be positive, got %s" % h)
        object.__setattr__(self, "h", h)
        if self.max_order < 0:
            raise DomainError("max_order must be nonnegative")
        fam = self.family

        def raw(t):
            u2 = t * t
            if u2 >= 1:
                return mpfr(0)
            return _profile(fam, u2)

        unit = integrate_1d(raw, (mpfr(-1), mpfr(1)), mpfr(MOMENT_TOL))
        amp = 1 / unit
        object.__setattr__(self, "amplitude", amp)
        base = [mpfr(1)]
        for j in range(1, self.max_order + 1):
            if j % 2:
                base.append(mpfr(0))
            else:
                half = integrate_1d(
                    lambda t: t**j * raw(t), (mpfr(0), mpfr(1)), mpfr(MOMENT_TOL)
                )
                base.append(amp * (2 * half))
        object.__setattr__(self, "_base_moments", tuple(base))
        object.__setattr__(self, "precision", current_precision())

    def _check_precision(self):
        if self.precision != current_precision():
            raise ValidationError(
                "mollifier built at precision %d used at %d"
                % (self.precision, current_precision())
            )

    def descriptor(self):
        return {"family": self.family, "h": str(self.h)}

    def base_moment(self, j):
        """Unit-bandwidth absolute moment int t^j phi(t) dt."""
        self._check_precision()
        if j < 0:
            raise DomainError("moment order must be nonnegative")
        if j > self.max_order:
            raise DomainError(
                "moment order %d beyond cache (max_order %d); rebuild the spec"
                % (j, self.max_order)
            )
        return self._base_moments[j]

    def variance(self):
        return self.base_moment(2)


def mollifier_eval(m, t):
    """phi_h(t): nonnegative, even, zero outside (-h, h)."""
    m._check_precision()
    t = ensure_real(t)
    u = t / m.h
    u2 = u * u
    if u2 >= 1:
        return mpfr(0)
    return m.amplitude * _profile(m.family, u2) / m.h


def mollifier_moment(m, j):
    """Signed moment c_j = (-1)^j int t^j phi_h; exact 0 for odd j.

    c_0 is exactly 1 by the normalization; even orders scale as h^j times
    the cached unit-bandwidth moment.
    """
    if j < 0:
        raise DomainError("moment order must be nonnegative")
    if j == 0:
        return mpfr(1)
    if j % 2:
        return mpfr(0)
    return m.h**j * m.base_moment(j)


def unit_integral_defect(m, tol=MOMENT_TOL):
    """|int phi_h - 1| by fresh quadrature (normalization self-check)."""
    m._check_precision()
    val = integrate_1d(
        lambda t: mollifier_eval(m, t), (-m.h, m.h), ensure_real(tol)
    )
    return abs(val - 1)


def modified_radon_eval(d, m, theta, p, tol=MOMENT_TOL):
    """Smoothed transform value: int Rf(theta, p - tau) phi_h(tau) dtau.

    The inner transform has kinks where p - tau crosses a square-corner
    projection; those points are passed to the quadrature as splits.
    """
    theta = ensure_real(theta)
    p = ensure_real(p)
    tol = ensure_real(tol)
    splits = [p - c for c in corner_splits(theta)]
    splits.sort()

    def f(tau):
        return radon_eval(d, theta, p - tau, tol) * mollifier_eval(m, tau)

    return integrate_1d(f, (-m.h, m.h), tol, splits=splits)


def discrete_kernel(m, step, prec=None):
    """Normalized trapezoid samples of phi_h on the offset grid.

    Samples phi_h((l - L) * step) for l = 0..2L, scaled so that the
    discrete mass step * sum equals 1 exactly; the scale approaches 1
    quickly as h/step grows, and the normalization keeps the smoothing
    mass-preserving even when h is comparable to the grid step.
    """
    step = ensure_real(step)
    if not step > 0:
        raise ValidationError("grid step must be positive")
    L = int(gmpy2.ceil(m.h / step))
    vals = [mollifier_eval(m, (l - L) * step) for l in range(2 * L + 1)]
    mass = mpfr(0)
    for v in vals:
        mass = mass + v
    mass = mass * step
    if not mass > 0:
        raise ValidationError("degenerate discrete kernel (h far below grid step)")
    return [v / mass for v in vals]


def mollify_sinogram(s, m):
    """Per-angle discrete convolution of the sinogram in the offset.

    Requires bandwidth within the grid padding (support must stay on the
    grid) and a not-yet-smoothed sinogram.
    """
    if s.mollifier is not None:
        raise MollifierStateError("sinogram is already mollified")
    if m.h > s.pad:
        raise SupportOverflowError(
            "bandwidth %s exceeds sinogram pad %s" % (m.h, s.pad)
        )
    kernel = discrete_kernel(m, s.step)
    rows = get_backend().convolve_uniform(
        [list(r) for r in s.values], kernel, s.step, current_precision()
    )
    meta = dict(s.meta)
    meta["mollifier"] = m.descriptor()
    return Sinogram(s.angles, s.offsets, tuple(tuple(r) for r in rows), meta)
