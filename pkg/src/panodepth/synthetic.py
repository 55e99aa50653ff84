"""Analytic box-room scenes and controlled distortions of them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geometry import directions
from .grid import (EquirectGrid, box_downsample, column_azimuths, resize_bilinear, row_zeniths,
                   target_rows)
from .partitions import padded_pixel_rect
from .registration import RegistrationPoly


@dataclass(frozen=True)
class BoxRoom:
    """Axis-aligned box ``[-h, h]`` per axis with a camera strictly inside."""

    half_extents: tuple = (3.0, 2.5, 1.5)
    camera: tuple = (0.4, -0.3, 0.1)

    def __post_init__(self):
        h = np.asarray(self.half_extents, float)
        c = np.asarray(self.camera, float)
        if h.shape != (3,) or c.shape != (3,):
            raise DomainError("half_extents and camera need three components")
        if np.any(h <= 0):
            raise DomainError(f"half extents must be positive: {self.half_extents}")
        if np.any(np.abs(c) >= h):
            raise DomainError(f"camera {self.camera} is not strictly inside the box")

    def ray_range(self, d):
        """Distance from the camera to the first wall along unit directions ``d``."""
        d = np.asarray(d, float)
        h = np.asarray(self.half_extents, float)
        c = np.asarray(self.camera, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(d > 0, (h - c) / d, np.where(d < 0, (-h - c) / d, np.inf))
        return t.min(axis=-1)

    def view_depth(self, view):
        """Planar depth of every pixel of a perspective view (along its axis)."""
        rays, _, _ = view.pixel_rays()
        norm = np.linalg.norm(rays, axis=-1)
        return self.ray_range(rays / norm[..., None]) / norm


def render_room_panorama(room, width, height, full_sphere=False):
    """Ray range per pixel; rows outside the target band are left out unless ``full_sphere``."""
    r0, r1 = (0, height) if full_sphere else target_rows(height)
    AZ, ZEN = np.meshgrid(column_azimuths(width), row_zeniths(height, r0, r1))
    rng = room.ray_range(directions(AZ, ZEN))
    return EquirectGrid(width, height, r0, r1, rng, np.ones(rng.shape, bool))


@dataclass
class DistortionSpec:
    polys: list
    noise_sigma: float = 0.0
    seed: int = 0

    def check_increasing(self, lo, hi, samples=1001):
        x = np.linspace(lo, hi, samples)
        for k, poly in enumerate(self.polys):
            if np.any(np.diff(poly(x)) <= 0):
                raise DomainError(f"distortion {k} is not increasing on [{lo}, {hi}]")


def random_distortions(n, seed, depth_range=(0.5, 6.0), bounds=(1e-3, 1e-2, 0.5, 1.0),
                       min_output=0.1, degree=3):
    """Random increasing cubics with ``|a|, |b|, |c|, |d|`` inside ``bounds``.

    Draws that would map the low end of ``depth_range`` to less than
    ``min_output`` are redrawn, so distorted depths stay positive.
    """
    rng = np.random.default_rng(seed)
    x = np.linspace(*depth_range, 1001)
    polys = []
    while len(polys) < n:
        a, b, c, d = rng.uniform(-1, 1, 4) * np.asarray(bounds)
        if degree < 3:
            a = 0.0
        if degree < 2:
            b = 0.0
        poly = RegistrationPoly(a, b, c, d, degree)
        y = poly(x)
        if y[0] >= min_output and np.all(np.diff(y) > 0):
            polys.append(poly)
    return polys


def make_distorted_partials(gt, grid, spec, pad_x=5, pad_y=2):
    """One padded partial per partition: ``poly_k(gt)`` plus seeded gaussian noise."""
    if len(spec.polys) != len(grid):
        raise DomainError(f"{len(spec.polys)} distortions for {len(grid)} partitions")
    out = []
    for k, (p, poly) in enumerate(zip(grid, spec.polys)):
        rect = padded_pixel_rect(p, gt.width, gt.height, pad_x, pad_y)
        band = gt.crop_rows(rect.row0, rect.row1)
        cols = rect.columns(gt.width)
        vals = poly(band.values[:, cols])
        if spec.noise_sigma > 0:
            rng = np.random.default_rng([spec.seed, k])
            vals = vals + rng.normal(0.0, spec.noise_sigma, vals.shape)
        part = EquirectGrid.empty(gt.width, gt.height, rect.row0, rect.row1)
        part.values[:, cols] = vals
        part.valid[:, cols] = band.valid[:, cols] & np.isfinite(vals)
        out.append(part)
    return out


def box_blur(g, radius):
    """Mean over a ``(2r+1)^2`` window of valid pixels; wraps in azimuth, clamps rows."""
    if radius <= 0:
        return g.copy()
    vals = g.filled(0.0)
    ok = g.valid.astype(float)
    total = np.zeros_like(vals)
    count = np.zeros_like(vals)
    rows = g.rows
    for dj in range(-radius, radius + 1):
        idx = np.clip(np.arange(rows) + dj, 0, rows - 1)
        for di in range(-radius, radius + 1):
            total += np.roll(vals[idx], -di, axis=1)
            count += np.roll(ok[idx], -di, axis=1)
    valid = g.valid & (count > 0)
    return g.with_values(np.where(valid, total / np.maximum(count, 1), np.nan), valid)


def degrade_reference(gt, down_factor=4, blur_radius=2):
    """Low-detail stand-in for a panoramic estimate: downsample, blur, upsample.

    The valid mask of ``gt`` is kept.
    """
    if down_factor < 1:
        raise DomainError(f"down_factor must be >= 1, got {down_factor}")
    if down_factor == 1 and blur_radius <= 0:
        return gt.copy()
    small = box_blur(box_downsample(gt, down_factor), blur_radius)
    up = resize_bilinear(small, gt.width, gt.height, gt.row_start, gt.row_end)
    return gt.with_values(np.where(gt.valid, up.values, np.nan), gt.valid & up.valid)
