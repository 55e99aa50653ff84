"""Rectangular partitions of the target zenith band and their pixel footprints."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import TARGET_ZENITH, round_half_up, target_rows

DEFAULT_AZIMUTH_CUTS = (0.0, 72.0, 144.0, 216.0, 288.0)
DEFAULT_ZENITH_CUTS = (25.0, 60.0, 120.0, 155.0)


@dataclass(frozen=True)
class Partition:
    """Azimuth ``[phi0, phi1)`` x zenith ``[theta0, theta1)`` in degrees.

    ``phi1`` may exceed 360 for a partition that wraps past azimuth 0.
    """

    phi0: float
    phi1: float
    theta0: float
    theta1: float

    def __post_init__(self):
        if not self.phi0 < self.phi1 <= self.phi0 + 360.0:
            raise ConfigError(f"bad azimuth span [{self.phi0}, {self.phi1})")
        if not 0.0 <= self.theta0 < self.theta1 <= 180.0:
            raise ConfigError(f"bad zenith span [{self.theta0}, {self.theta1})")

    def to_dict(self):
        return {"phi0": self.phi0, "phi1": self.phi1, "theta0": self.theta0, "theta1": self.theta1}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["phi0"]), float(d["phi1"]), float(d["theta0"]), float(d["theta1"]))


@dataclass
class PartitionGrid:
    azimuth_cuts: list
    zenith_cuts: list
    partitions: list = field(default_factory=list)

    @property
    def n_rows(self):
        return len(self.zenith_cuts) - 1

    @property
    def n_cols(self):
        return len(self.azimuth_cuts)

    def partition(self, row, col):
        return self.partitions[row * self.n_cols + col]

    def __len__(self):
        return len(self.partitions)

    def __iter__(self):
        return iter(self.partitions)


def grid_from_cuts(azimuth_cuts, zenith_cuts):
    az = [float(a) for a in azimuth_cuts]
    zen = [float(z) for z in zenith_cuts]
    if len(az) < 1:
        raise ConfigError("need at least one azimuth cut")
    if len(zen) < 2:
        raise ConfigError("need at least two zenith cuts")
    if any(b <= a for a, b in zip(az, az[1:])) or any(b <= a for a, b in zip(zen, zen[1:])):
        raise ConfigError(f"cuts must be strictly increasing: {az} / {zen}")
    if az[0] < 0.0 or az[-1] >= 360.0:
        raise ConfigError(f"azimuth cuts must lie in [0, 360): {az}")
    if zen[0] != TARGET_ZENITH[0] or zen[-1] != TARGET_ZENITH[1]:
        raise ConfigError(f"zenith cuts must run from {TARGET_ZENITH[0]} to {TARGET_ZENITH[1]}: {zen}")
    ends = az[1:] + [az[0] + 360.0]
    parts = [Partition(a0, a1, z0, z1)
             for z0, z1 in zip(zen, zen[1:])
             for a0, a1 in zip(az, ends)]
    return PartitionGrid(az, zen, parts)


def default_grid():
    return grid_from_cuts(DEFAULT_AZIMUTH_CUTS, DEFAULT_ZENITH_CUTS)


@dataclass(frozen=True)
class PixelRect:
    """Pixel rectangle ``[col0, col1) x [row0, row1)``; columns wrap modulo the width."""

    col0: int
    col1: int
    row0: int
    row1: int

    def columns(self, width):
        return np.arange(self.col0, self.col1) % width

    @property
    def n_cols(self):
        return self.col1 - self.col0

    @property
    def n_rows(self):
        return self.row1 - self.row0

    def degrees(self, width, height):
        """The rectangle's outer pixel borders as a :class:`Partition`."""
        return Partition(self.col0 * 360.0 / width, self.col1 * 360.0 / width,
                         self.row0 * 180.0 / height, self.row1 * 180.0 / height)


def padded_pixel_rect(p, width, height, pad_x=5, pad_y=2, domain=TARGET_ZENITH):
    """Pixel footprint of a partition dilated by the padding.

    Borders round half-up to pixel boundaries.  Padding wraps horizontally and
    is clipped vertically to the target band.
    """
    if width <= 0 or height <= 0:
        raise ConfigError(f"bad raster size {width}x{height}")
    lo, hi = target_rows(height, domain)
    c0 = round_half_up(width * p.phi0 / 360.0) - pad_x
    c1 = round_half_up(width * p.phi1 / 360.0) + pad_x
    c1 = min(c1, c0 + width)
    r0 = max(round_half_up(height * p.theta0 / 180.0) - pad_y, lo)
    r1 = min(round_half_up(height * p.theta1 / 180.0) + pad_y, hi)
    return PixelRect(c0, c1, r0, r1)
