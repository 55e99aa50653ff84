"""Spherical coordinates, pinhole views and the warps between them.

World space is right-handed with +z up.  Azimuth runs counter-clockwise from
+x in the x-y plane, zenith is measured from +z, both in degrees.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DomainError, GeometryError
from .grid import EquirectGrid, column_azimuths, row_zeniths, sample, tap_rows, weighted_taps

FOVX_RULES = ("tight", "corner")


@dataclass(frozen=True)
class SphericalDirection:
    azimuth: float
    zenith: float

    def __post_init__(self):
        if not np.isfinite(self.azimuth) or not np.isfinite(self.zenith):
            raise DomainError(f"non-finite direction ({self.azimuth}, {self.zenith})")
        if not 0.0 <= self.zenith <= 180.0:
            raise DomainError(f"zenith {self.zenith} outside [0, 180]")
        az = float(self.azimuth) % 360.0
        object.__setattr__(self, "azimuth", 0.0 if az == 360.0 else az)
        object.__setattr__(self, "zenith", float(self.zenith))


def directions(azimuth, zenith):
    """Vectorized unit directions, shape ``broadcast(azimuth, zenith) + (3,)``."""
    phi = np.radians(azimuth)
    theta = np.radians(zenith)
    s = np.sin(theta)
    return np.stack(np.broadcast_arrays(s * np.cos(phi), s * np.sin(phi), np.cos(theta)), axis=-1)


def dir_from_spherical(s):
    return directions(s.azimuth, s.zenith)


def angles_from_directions(d):
    """Inverse of :func:`directions` for arrays of (not necessarily unit) vectors."""
    d = np.asarray(d, float)
    horiz = np.hypot(d[..., 0], d[..., 1])
    zen = np.degrees(np.arctan2(horiz, d[..., 2]))
    az = np.degrees(np.arctan2(d[..., 1], d[..., 0])) % 360.0
    az = np.where((horiz == 0) | (az == 360.0), 0.0, az)
    return az, zen


def spherical_from_dir(v):
    v = np.asarray(v, float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0:
        raise DomainError("cannot take the direction of a zero vector")
    az, zen = angles_from_directions(v / n)
    return SphericalDirection(float(az), float(zen))


@dataclass(frozen=True)
class PerspectiveView:
    """Pinhole camera at the origin with +z up.

    The image plane sits at unit distance along :attr:`forward`; image-plane
    coordinate ``u`` runs along :attr:`left` and ``v`` along :attr:`up`.
    """

    center: SphericalDirection
    fov_x: float
    fov_y: float
    width: int = 1024
    height: int = 989

    def __post_init__(self):
        for name in ("fov_x", "fov_y"):
            fov = getattr(self, name)
            if not 0.0 < fov < 180.0:
                raise GeometryError(f"{name}={fov} outside (0, 180)")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(f"bad view size {self.width}x{self.height}")

    @property
    def forward(self):
        return dir_from_spherical(self.center)

    @property
    def left(self):
        phi = np.radians(self.center.azimuth)
        return np.array([-np.sin(phi), np.cos(phi), 0.0])

    @property
    def up(self):
        return np.cross(self.forward, self.left)

    @property
    def half_extent(self):
        """``(tan(fov_x / 2), tan(fov_y / 2))``."""
        return np.tan(np.radians(self.fov_x) / 2), np.tan(np.radians(self.fov_y) / 2)

    def project(self, d):
        """Image-plane ``(u, v, in_front)`` for an array of directions."""
        d = np.asarray(d, float)
        depth = d @ self.forward
        front = depth > 0
        safe = np.where(front, depth, 1.0)
        return (d @ self.left) / safe, (d @ self.up) / safe, front

    def pixel_plane_coords(self):
        """``(u, v)`` of every pixel center, each of shape ``(height, width)``."""
        tx, ty = self.half_extent
        u = tx * (1.0 - 2.0 * (np.arange(self.width) + 0.5) / self.width)
        v = ty * (1.0 - 2.0 * (np.arange(self.height) + 0.5) / self.height)
        return np.meshgrid(u, v)

    def pixel_rays(self):
        """Unnormalized rays ``forward + u*left + v*up`` through pixel centers."""
        u, v = self.pixel_plane_coords()
        return (self.forward + u[..., None] * self.left + v[..., None] * self.up), u, v

    def to_dict(self):
        return {"azimuth": self.center.azimuth, "zenith": self.center.zenith,
                "fov_x": self.fov_x, "fov_y": self.fov_y,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d):
        return cls(SphericalDirection(d["azimuth"], d["zenith"]), d["fov_x"], d["fov_y"],
                   int(d["width"]), int(d["height"]))


def project_dir_to_view(view, d):
    """``(u, v)`` for a unit direction, or None when it lies behind the camera."""
    u, v, front = view.project(np.asarray(d, float))
    if not front:
        return None
    return float(u), float(v)


def _plane_coords(tilt, azimuth_offset, zenith):
    """``(u, v, depth)`` for a camera at azimuth 0 tilted up by ``tilt`` degrees."""
    t = np.radians(tilt)
    d = directions(azimuth_offset, zenith)
    fwd = np.array([np.cos(t), 0.0, np.sin(t)])
    up = np.array([-np.sin(t), 0.0, np.cos(t)])
    depth = d @ fwd
    return d[..., 1] / depth, (d @ up) / depth, depth


def solve_view_for_partition(p, width=1024, height=989, fovx_rule="tight"):
    """Smallest view centered on a partition whose footprint contains it.

    The view looks at the angular center of the partition.  The analysis is
    done with the view rotated to azimuth 0 and, for views below the equator,
    mirrored to the tilt-up case.  The vertical half-extent is fixed by the
    upper corner ``c`` (azimuth offset equal to half the partition width, at
    the top zenith): the upper image edge must pass through it.  When the
    partition reaches across the equator, the top or bottom side farther from
    the equator constrains, which covers both cases at once.

    ``fovx_rule`` chooses the horizontal half-extent:

    * ``"tight"``: the side edges pass through the partition's lower corners,
      so the view touches the partition there and at ``c``.
    * ``"corner"``: the lower image corner ``c0 = M + tx*Left - ty*Up`` gets
      the partition's azimuth offset, which leaves slack below the partition
      for tilted views.
    """
    if fovx_rule not in FOVX_RULES:
        raise GeometryError(f"unknown fovx rule {fovx_rule!r}")
    half = (p.phi1 - p.phi0) / 2.0
    if not 0.0 < half <= 90.0:
        raise GeometryError(f"partition azimuth span {p.phi1 - p.phi0} not in (0, 180]")
    zc = (p.theta0 + p.theta1) / 2.0
    # mirror tilt-down views: zeniths z -> 180 - z
    top, bottom = (p.theta0, p.theta1) if zc <= 90.0 else (180.0 - p.theta1, 180.0 - p.theta0)
    tilt = 90.0 - min(zc, 180.0 - zc)

    offsets = np.array([half, half, 0.0, 0.0])
    zens = np.array([top, bottom, top, bottom])
    u, v, depth = _plane_coords(tilt, offsets, zens)
    if np.any(depth <= 1e-12):
        raise GeometryError(f"partition {p} reaches behind its view; FOV would be >= 180")
    ty = float(np.max(np.abs(v)))

    if fovx_rule == "tight":
        tx = float(np.max(np.abs(u[:2])))
    else:
        t = np.radians(tilt)
        tx = float(np.tan(np.radians(half)) * (np.cos(t) + ty * np.sin(t)))
    fov_x = 2.0 * np.degrees(np.arctan(tx))
    fov_y = 2.0 * np.degrees(np.arctan(ty))
    if not (fov_x < 180.0 and fov_y < 180.0):
        raise GeometryError(f"partition {p} needs FOV >= 180")
    center = SphericalDirection((p.phi0 + p.phi1) / 2.0, zc)
    return PerspectiveView(center, float(fov_x), float(fov_y), width, height)


def _check_rows(src, rows):
    missing = rows[(rows < src.row_start) | (rows >= src.row_end)]
    if missing.size:
        raise CoverageError(f"view needs source rows {_format_ranges(missing)} outside "
                            f"covered rows [{src.row_start}, {src.row_end})")


def _format_ranges(rows):
    rows = np.unique(rows)
    parts = []
    start = prev = int(rows[0])
    for r in map(int, rows[1:]):
        if r != prev + 1:
            parts.append(f"{start}-{prev}" if start != prev else str(start))
            start = r
        prev = r
    parts.append(f"{start}-{prev}" if start != prev else str(start))
    return ",".join(parts)


def render_view(src, view):
    """Perspective raster ``(height, width)`` sampled from an equirect grid.

    Invalid source taps give NaN output pixels.
    """
    rays, _, _ = view.pixel_rays()
    az, zen = angles_from_directions(rays)
    _check_rows(src, tap_rows(src.height, zen))
    values, _ = sample(src, az, zen, strict=True)
    return values


def render_view_image(image, view):
    """Render a ``(H, W)`` or ``(H, W, C)`` full panorama array channel by channel."""
    image = np.asarray(image)
    channels = image[..., None] if image.ndim == 2 else image
    out = np.stack([render_view(EquirectGrid.from_array(channels[..., c].astype(float)), view)
                    for c in range(channels.shape[-1])], axis=-1)
    return out[..., 0] if image.ndim == 2 else out


def sample_view(persp, view, u, v):
    """Bilinear lookup in a perspective raster at image-plane coordinates.

    Lookups clamp to the outermost pixel centers; NaN taps propagate.
    """
    persp = np.asarray(persp, float)
    h, w = persp.shape
    tx, ty = view.half_extent
    px = np.clip((1.0 - u / tx) * (w / 2.0) - 0.5, 0.0, w - 1.0)
    py = np.clip((1.0 - v / ty) * (h / 2.0) - 0.5, 0.0, h - 1.0)
    i0 = np.minimum(np.floor(px).astype(np.int64), w - 1)
    j0 = np.minimum(np.floor(py).astype(np.int64), h - 1)
    fx, fy = px - i0, py - j0
    i1, j1 = np.minimum(i0 + 1, w - 1), np.minimum(j0 + 1, h - 1)
    taps = []
    bad = np.zeros(np.shape(px), bool)
    for jj, wy in ((j0, 1 - fy), (j1, fy)):
        for ii, wx in ((i0, 1 - fx), (i1, fx)):
            wgt = wx * wy
            tap = persp[jj, ii]
            bad |= (wgt > 0) & ~np.isfinite(tap)
            taps.append((np.nan_to_num(tap), wgt))
    return weighted_taps(taps, ~bad)


def warp_view_to_equirect(persp, view, rect, width, height, z_to_range=True):
    """Resample a perspective raster onto the pixels of an equirect rectangle.

    ``rect`` is a :class:`~panodepth.partitions.PixelRect` (possibly wrapping in
    azimuth) in a ``width x height`` panorama.  With ``z_to_range`` the sampled
    planar depth is converted to ray range by the factor ``sqrt(1 + u^2 + v^2)``.
    """
    cols = rect.columns(width)
    az = column_azimuths(width)[cols]
    zen = row_zeniths(height, rect.row0, rect.row1)
    AZ, ZEN = np.meshgrid(az, zen)
    u, v, front = view.project(directions(AZ, ZEN))
    tx, ty = view.half_extent
    tol = 1e-9
    outside = ~front | (np.abs(u) > tx * (1 + tol)) | (np.abs(v) > ty * (1 + tol))
    if outside.any():
        j, i = np.argwhere(outside)[0]
        raise CoverageError(f"pixel (col {cols[i]}, row {rect.row0 + j}) of the padded region "
                            f"falls outside the view frustum")
    vals = sample_view(persp, view, u, v)
    if z_to_range:
        vals = vals * np.sqrt(1.0 + u * u + v * v)
    out = EquirectGrid.empty(width, height, rect.row0, rect.row1)
    out.values[:, cols] = vals
    out.valid[:, cols] = np.isfinite(vals)
    return out
