"""Working-precision management and decimal serialization for mpfr reals.

All arithmetic in the toolkit runs on gmpy2.mpfr values under a fixed
working precision (bits). MPFR rounds every operation correctly at that
precision, so identical inputs give bit-identical results regardless of
platform or schedule. The precision is fixed per pipeline run; values
created under a different precision are rejected at module boundaries.
"""

import math
from contextlib import contextmanager

import gmpy2
from gmpy2 import mpfr

from .errors import PrecisionError, ValidationError

DEFAULT_PRECISION = 256
MIN_PRECISION = 64

# Quadrature tolerance picked from the working precision: leave ~40 bits
# of rounding headroom, but never chase more than ~80 decimal digits.
_AUTO_TOL_HEADROOM = 40
_AUTO_TOL_FLOOR_EXP = 266


@contextmanager
def working_precision(bits):
    """Run a block at the given MPFR precision (round-to-nearest)."""
    if bits < MIN_PRECISION:
        raise PrecisionError("precision %d below minimum %d" % (bits, MIN_PRECISION))
    with gmpy2.context(precision=bits):
        yield


def current_precision():
    return gmpy2.get_context().precision


def real(x):
    """Convert to mpfr at the working precision."""
    return mpfr(x)


def ensure_real(x):
    """Convert to mpfr, rejecting mpfr inputs of foreign precision."""
    if isinstance(x, mpfr) and x.precision != current_precision():
        raise PrecisionError(
            "operand precision %d does not match working precision %d"
            % (x.precision, current_precision())
        )
    return mpfr(x)


def check_uniform_precision(values):
    """Reject any mpfr whose precision differs from the working one."""
    p = current_precision()
    for v in values:
        if isinstance(v, mpfr) and v.precision != p:
            raise PrecisionError(
                "mixed precision: found %d-bit operand at working precision %d"
                % (v.precision, p)
            )


def pi():
    return gmpy2.const_pi()


def sqrt2():
    return gmpy2.sqrt(mpfr(2))


def auto_quad_tol(bits=None):
    """Default absolute quadrature tolerance for the given precision."""
    if bits is None:
        bits = current_precision()
    return mpfr(2) ** -min(bits - _AUTO_TOL_HEADROOM, _AUTO_TOL_FLOOR_EXP)


def serial_digits(bits=None):
    """Significant decimal digits that round-trip a bits-wide mpfr."""
    if bits is None:
        bits = current_precision()
    return math.ceil(bits * math.log10(2)) + 2


def to_decimal(x, digits=None):
    """Serialize an mpfr as a round-trip-exact decimal string."""
    x = mpfr(x)
    if not gmpy2.is_finite(x):
        raise ValidationError("cannot serialize non-finite value %s" % x)
    if x == 0:
        return "0"
    if digits is None:
        digits = serial_digits(x.precision)
    ds, exp, _ = gmpy2.digits(x, 10, digits)
    neg = ds.startswith("-")
    if neg:
        ds = ds[1:]
    return ("-" if neg else "") + ds[0] + "." + ds[1:] + "e" + str(exp - 1)


def from_decimal(s):
    """Parse a decimal string to mpfr at the working precision."""
    try:
        return mpfr(s.strip())
    except (ValueError, TypeError) as exc:
        raise ValidationError("bad decimal literal %r" % (s,)) from exc
