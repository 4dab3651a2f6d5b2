"""Forward line-integral transform on the unit square.

A sinogram samples the transform on an angle grid in (0, pi) times a
uniform offset grid wide enough to hold the support (half-diagonal) plus
padding for later smoothing. Angles 0 and pi are excluded from grids:
the angular moment systems downstream need sin(theta) != 0.
"""

from dataclasses import dataclass
import random

import gmpy2
from gmpy2 import mpfr

from . import gauss
from .backend import get_backend
from .errors import DomainError, QuadratureError, ValidationError
from .numerics import GL_NODES
from .precision import ensure_real, pi, sqrt2

DEFAULT_ANGLE_COUNT = 164
DEFAULT_OFFSET_COUNT = 2001
DEFAULT_PAD = "0.2"
DEFAULT_TOL = "1e-30"
MIN_ANGLE_SNAP = "1e-9"


def default_angles(n=DEFAULT_ANGLE_COUNT):
    """Midpoint placement theta_i = (i + 1/2) pi / n, open at 0 and pi."""
    if n < 1:
        raise ValidationError("need at least one angle")
    pival = pi()
    return [(mpfr(i) + mpfr(1) / 2) * pival / n for i in range(n)]


def build_offsets(m, pad=DEFAULT_PAD):
    """Uniform offsets covering [-(sqrt2+pad), sqrt2+pad] inclusive."""
    if m < 2:
        raise ValidationError("need at least two offsets")
    pad = ensure_real(pad)
    if pad < 0:
        raise ValidationError("pad must be nonnegative")
    half = sqrt2() + pad
    step = (2 * half) / (m - 1)
    return [-half + j * step for j in range(m)]


def corner_splits(theta):
    """Sorted distinct offset projections of the square's corners.

    Between consecutive projections the transform is smooth in p; outside
    the extremes it vanishes.
    """
    c = gmpy2.cos(theta)
    s = gmpy2.sin(theta)
    vals = [mpfr(0), c, s, c + s]
    vals.sort()
    out = [vals[0]]
    for v in vals[1:]:
        if v != out[-1]:
            out.append(v)
    return out


def _validate_angles(angles):
    if not angles:
        raise ValidationError("empty angle list")
    pival = pi()
    prev = None
    for th in angles:
        if not (0 < th < pival):
            raise ValidationError("angle %s outside (0, pi)" % th)
        if prev is not None and not th > prev:
            raise ValidationError("angles must be strictly increasing and distinct")
        prev = th


@dataclass(frozen=True)
class Sinogram:
    """Sampled transform values[angle][offset] plus provenance metadata."""

    angles: tuple
    offsets: tuple
    values: tuple
    meta: dict

    def __post_init__(self):
        _validate_angles(self.angles)
        m = len(self.offsets)
        if m < 2:
            raise ValidationError("need at least two offsets")
        step = self.offsets[1] - self.offsets[0]
        if not step > 0:
            raise ValidationError("offsets must be strictly increasing")
        slack = abs(step) * mpfr("1e-6")
        for j in range(1, m):
            if abs((self.offsets[j] - self.offsets[j - 1]) - step) > slack:
                raise ValidationError("offset grid must be uniform")
        if len(self.values) != len(self.angles) or any(len(r) != m for r in self.values):
            raise ValidationError("value matrix shape mismatch")
        for row in self.values:
            for v in row:
                if not gmpy2.is_finite(v):
                    raise ValidationError("non-finite sinogram value")

    @property
    def step(self):
        return self.offsets[1] - self.offsets[0]

    @property
    def pad(self):
        return self.meta.get("pad", mpfr(0))

    @property
    def mollifier(self):
        return self.meta.get("mollifier")

    @property
    def noise(self):
        return self.meta.get("noise")

    @property
    def density_id(self):
        return self.meta.get("density", "external")


def radon_eval(d, theta, p, tol=DEFAULT_TOL):
    """Line integral of the density over the offset-p line at angle theta.

    The line is clipped against the unit square and the chord integrated
    adaptively; lines missing (or tangent to) the square give 0.
    """
    theta = ensure_real(theta)
    p = ensure_real(p)
    tol = ensure_real(tol)
    nodes, weights = gauss.nodes_weights(GL_NODES)
    value, defect = get_backend().chord_integral(
        d.descriptor(), theta, p, gmpy2.get_context().precision, tol, nodes, weights
    )
    if defect > tol:
        raise QuadratureError(
            "chord quadrature stalled at error %s (tol %s)" % (defect, tol),
            achieved=defect,
            requested=tol,
        )
    return value


def make_sinogram(d, angles, m=DEFAULT_OFFSET_COUNT, pad=DEFAULT_PAD, tol=DEFAULT_TOL):
    """Sample the transform on angles x uniform offsets."""
    angles = [ensure_real(t) for t in angles]
    _validate_angles(angles)
    offsets = build_offsets(m, pad)
    tol = ensure_real(tol)
    nodes, weights = gauss.nodes_weights(GL_NODES)
    rows, defect = get_backend().sinogram_values(
        d.descriptor(), angles, offsets, gmpy2.get_context().precision, tol, nodes, weights
    )
    if defect > tol * len(angles) * m:
        raise QuadratureError(
            "sinogram quadrature stalled (defect %s)" % defect, achieved=defect, requested=tol
        )
    meta = {
        "density": d.name,
        "pad": ensure_real(pad),
        "noise": None,
        "mollifier": None,
        "angle_placement": "uniform-midpoint",
        "tol": tol,
    }
    return Sinogram(
        tuple(angles), tuple(offsets), tuple(tuple(r) for r in rows), meta
    )


@dataclass(frozen=True)
class GaussianNoise:
    sigma: object

    model = "gaussian"

    def descriptor(self, seed):
        return {"model": "gaussian", "sigma": str(self.sigma), "seed": seed}


@dataclass(frozen=True)
class UniformNoise:
    amplitude: object

    model = "uniform"

    def descriptor(self, seed):
        return {"model": "uniform", "amplitude": str(self.amplitude), "seed": seed}


@dataclass(frozen=True)
class SinusoidalNoise:
    amplitude: object
    frequency: object

    model = "sinusoidal"

    def descriptor(self, seed):
        return {
            "model": "sinusoidal",
            "amplitude": str(self.amplitude),
            "frequency": str(self.frequency),
            "seed": seed,
        }


def add_noise(s, model, seed=0):
    """Perturb a sinogram; deterministic for a fixed seed.

    gaussian: iid N(0, sigma^2) per cell; uniform: iid U(-amplitude,
    amplitude); sinusoidal: amplitude * sin(frequency * p_j), no
    randomness.
    """
    if isinstance(model, GaussianNoise):
        sigma = ensure_real(model.sigma)
        if sigma < 0:
            raise ValidationError("gaussian sigma must be nonnegative")
        rng = random.Random(seed)
        sf = float(sigma)
        new = tuple(
            tuple(v + mpfr(rng.gauss(0.0, sf)) for v in row) for row in s.values
        )
    elif isinstance(model, UniformNoise):
        eps = ensure_real(model.amplitude)
        if eps < 0:
            raise ValidationError("uniform amplitude must be nonnegative")
        rng = random.Random(seed)
        ef = float(eps)
        new = tuple(
            tuple(v + mpfr(rng.uniform(-ef, ef)) for v in row) for row in s.values
        )
    elif isinstance(model, SinusoidalNoise):
        eps = ensure_real(model.amplitude)
        if eps < 0:
            raise ValidationError("sinusoidal amplitude must be nonnegative")
        om = ensure_real(model.frequency)
        wave = [eps * gmpy2.sin(om * p) for p in s.offsets]
        new = tuple(tuple(v + wave[j] for j, v in enumerate(row)) for row in s.values)
    else:
        raise ValidationError("unknown noise model %r" % (model,))
    meta = dict(s.meta)
    meta["noise"] = model.descriptor(seed)
    return Sinogram(s.angles, s.offsets, new, meta)


def angle_weights(angles):
    """Midpoint-cell weights for integrating over theta in (0, pi)."""
    n = len(angles)
    bounds = [mpfr(0)]
    for i in range(n - 1):
        bounds.append((angles[i] + angles[i + 1]) / 2)
    bounds.append(pi())
    return [bounds[i + 1] - bounds[i] for i in range(n)]


def l1_norm_estimate(s):
    """Discrete L1 norm of the transform over the full angle circle.

    Angles cover (0, pi); evenness supplies the other half, hence the
    factor 2.
    """
    step = s.step
    wtheta = angle_weights(s.angles)
    total = mpfr(0)
    m = len(s.offsets)
    for i, row in enumerate(s.values):
        acc = (abs(row[0]) + abs(row[m - 1])) / 2
        for j in range(1, m - 1):
            acc = acc + abs(row[j])
        total = total + wtheta[i] * (acc * step)
    return 2 * total


def row_mass(s, i):
    """Trapezoid integral over p of one sinogram row."""
    row = s.values[i]
    m = len(row)
    acc = (row[0] + row[m - 1]) / 2
    for j in range(1, m - 1):
        acc = acc + row[j]
    return acc * s.step
