"""Per-partition depth registration against a reference panorama.

The transform is ``f(x) = a x^3 + b x^2 + c x + d + x``: the polynomial part
models the residual ``X - x`` between the reference and the partition.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DegenerateFitError, InsufficientSamplesError
from .grid import sample

MIN_SAMPLES = 4


@dataclass(frozen=True)
class RegistrationPoly:
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    degree: int = 3

    def __post_init__(self):
        if self.degree not in (1, 2, 3):
            raise ValueError(f"degree must be 1, 2 or 3, not {self.degree}")
        if self.degree < 3 and self.a != 0.0 or self.degree < 2 and self.b != 0.0:
            raise ValueError(f"degree {self.degree} polynomial with nonzero higher coefficients")

    @classmethod
    def identity(cls, degree=3):
        return cls(degree=degree)

    @property
    def coefficients(self):
        return self.a, self.b, self.c, self.d

    def __call__(self, x):
        x = np.asarray(x, float)
        return ((self.a * x + self.b) * x + self.c) * x + self.d + x

    def to_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d, "degree": self.degree}


@dataclass
class SamplePairs:
    x: np.ndarray
    X: np.ndarray

    @property
    def count(self):
        return int(self.x.size)


def lattice(start, stop, step):
    n = int(np.ceil((stop - start) / step - 1e-9))
    return start + step * np.arange(n)


def sample_pairs(partial, reference, p, step_deg=1.0):
    """Read both grids at a regular lattice of directions inside the partition.

    Lattice points start at the partition's lower bounds and step by
    ``step_deg`` up to (excluding) the upper bounds.  Pairs where either lookup
    is invalid or non-positive are dropped.
    """
    az = lattice(p.phi0, p.phi1, step_deg)
    zen = lattice(p.theta0, p.theta1, step_deg)
    AZ, ZEN = np.meshgrid(az, zen)
    x, okx = sample(partial, AZ, ZEN)
    X, okX = sample(reference, AZ, ZEN)
    keep = okx & okX & (x > 0) & (X > 0)
    if keep.sum() < MIN_SAMPLES:
        raise InsufficientSamplesError(
            f"partition {p.to_dict()} has only {int(keep.sum())} usable samples (need {MIN_SAMPLES})")
    return SamplePairs(x[keep], X[keep])


def fit_poly(s, degree=3):
    """Least-squares fit of the residual polynomial.

    The normal equations are formed in the variable ``t = (x - mid) / half``
    mapped onto [-1, 1], which keeps the small system well conditioned, and
    the solution is expanded back into powers of ``x``.
    """
    if degree not in (1, 2, 3):
        raise ValueError(f"degree must be 1, 2 or 3, not {degree}")
    x = np.asarray(s.x, float)
    y = np.asarray(s.X, float) - x
    if np.unique(x).size < degree + 1:
        raise DegenerateFitError(f"need {degree + 1} distinct depth values, got {np.unique(x).size}")
    lo, hi = x.min(), x.max()
    mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
    t = (x - mid) / half
    basis = np.vander(t, degree + 1, increasing=True)
    normal = basis.T @ basis
    rhs = basis.T @ y
    if np.linalg.cond(normal) > 1e12:
        raise DegenerateFitError("normal matrix is rank deficient")
    beta = np.linalg.solve(normal, rhs)
    # sum beta_k ((x - mid) / half)^k  ->  powers of x
    coef = np.zeros(1)
    step = np.array([-mid / half, 1.0 / half])
    power = np.ones(1)
    for b in beta:
        coef = P.polyadd(coef, b * power)
        power = P.polymul(power, step)
    coef = np.pad(coef, (0, 4 - coef.size))
    d, c, b2, a = coef
    return RegistrationPoly(float(a) if degree == 3 else 0.0,
                            float(b2) if degree >= 2 else 0.0,
                            float(c), float(d), degree)


def sse(poly, s):
    r = poly(s.x) - s.X
    return float(r @ r)


def apply_poly(poly, partial):
    """Transform every valid pixel, clamping negative depths to 0."""
    out = partial.copy()
    v = out.valid
    out.values[v] = np.maximum(poly(out.values[v]), 0.0)
    return out
