"""Equirectangular rasters and the resampling primitives shared by all stages.

Pixel ``(i, j)`` of a ``W x H`` panorama has its center at azimuth
``(i + 0.5) * 360 / W`` and zenith ``(j + 0.5) * 180 / H``.  A grid may cover
only a horizontal band of rows ``[row_start, row_end)``; arrays are stored for
that band only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TARGET_ZENITH = (25.0, 155.0)


def round_half_up(x):
    return int(np.floor(x + 0.5))


def target_rows(height, domain=TARGET_ZENITH):
    """Row range ``[r0, r1)`` of the target zenith band at the given height."""
    return (round_half_up(height * domain[0] / 180.0),
            round_half_up(height * domain[1] / 180.0))


def column_azimuths(width):
    return (np.arange(width) + 0.5) * (360.0 / width)


def row_zeniths(height, row_start=0, row_end=None):
    row_end = height if row_end is None else row_end
    return (np.arange(row_start, row_end) + 0.5) * (180.0 / height)


@dataclass
class EquirectGrid:
    """Scalar raster over (a row band of) the equirectangular domain.

    ``values`` and ``valid`` have shape ``(row_end - row_start, width)``.
    Invalid pixels are stored as NaN.
    """

    width: int
    height: int
    row_start: int
    row_end: int
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if not (0 <= self.row_start < self.row_end <= self.height):
            raise ValueError(
                f"bad row range [{self.row_start}, {self.row_end}) for height {self.height}")
        shape = (self.row_end - self.row_start, self.width)
        values = np.array(self.values, dtype=np.float64)
        valid = np.array(self.valid, dtype=bool)
        if values.shape != shape or valid.shape != shape:
            raise ValueError(f"arrays must have shape {shape}, got {values.shape} / {valid.shape}")
        valid &= np.isfinite(values)
        values[~valid] = np.nan
        self.values = values
        self.valid = valid

    @classmethod
    def from_array(cls, values, row_start=0, height=None):
        """Wrap a 2-D array; NaN entries become invalid."""
        values = np.asarray(values, dtype=np.float64)
        height = values.shape[0] + row_start if height is None else height
        return cls(values.shape[1], height, row_start, row_start + values.shape[0],
                   values, np.isfinite(values))

    @classmethod
    def empty(cls, width, height, row_start=0, row_end=None):
        row_end = height if row_end is None else row_end
        shape = (row_end - row_start, width)
        return cls(width, height, row_start, row_end, np.full(shape, np.nan), np.zeros(shape, bool))

    @property
    def rows(self):
        return self.row_end - self.row_start

    @property
    def shape(self):
        return self.values.shape

    def copy(self):
        return EquirectGrid(self.width, self.height, self.row_start, self.row_end,
                            self.values.copy(), self.valid.copy())

    def filled(self, fill=0.0):
        return np.where(self.valid, self.values, fill)

    def with_values(self, values, valid=None):
        return EquirectGrid(self.width, self.height, self.row_start, self.row_end,
                            values, self.valid if valid is None else valid)

    def crop_rows(self, row_start, row_end):
        """Re-band the grid; rows outside the old band come back invalid."""
        out = EquirectGrid.empty(self.width, self.height, row_start, row_end)
        lo, hi = max(row_start, self.row_start), min(row_end, self.row_end)
        if lo < hi:
            out.values[lo - row_start:hi - row_start] = self.values[lo - self.row_start:hi - self.row_start]
            out.valid[lo - row_start:hi - row_start] = self.valid[lo - self.row_start:hi - self.row_start]
        return out

    def to_full(self):
        """Full ``height x width`` array, NaN outside the band and on invalid pixels."""
        out = np.full((self.height, self.width), np.nan)
        out[self.row_start:self.row_end] = self.values
        return out

    def valid_rows(self):
        """Smallest row range holding every valid pixel, or None."""
        rows = np.flatnonzero(self.valid.any(axis=1))
        if rows.size == 0:
            return None
        return self.row_start + int(rows[0]), self.row_start + int(rows[-1]) + 1

    def trimmed(self):
        rng = self.valid_rows()
        return self if rng is None else self.crop_rows(*rng)


def _axis_weights(coord, size, wrap):
    i0 = np.floor(coord).astype(np.int64)
    f = coord - i0
    if wrap:
        return i0 % size, (i0 + 1) % size, f
    i0c = np.clip(i0, 0, size - 1)
    i1c = np.clip(i0 + 1, 0, size - 1)
    f = np.where((coord <= 0) | (coord >= size - 1), 0.0, f)
    return i0c, i1c, f


def sample(grid, azimuth, zenith, strict=True):
    """Bilinear lookup at directions given in degrees (arrays broadcast).

    Horizontal lookups wrap across azimuth 0/360; vertical lookups clamp at the
    poles.  Taps outside the grid's row band count as invalid.  In ``strict``
    mode any invalid tap with nonzero weight makes the result invalid;
    otherwise weights are renormalized over valid taps.

    Returns ``(values, valid)``.
    """
    azimuth, zenith = np.broadcast_arrays(np.asarray(azimuth, float), np.asarray(zenith, float))
    x = azimuth * (grid.width / 360.0) - 0.5
    y = zenith * (grid.height / 180.0) - 0.5
    i0, i1, fx = _axis_weights(x, grid.width, wrap=True)
    j0, j1, fy = _axis_weights(y, grid.height, wrap=False)
    return _gather(grid, i0, i1, fx, j0, j1, fy, strict)


def weighted_taps(taps, valid_out):
    """Normalized weighted mean of ``(value, weight)`` taps (zero weight = unused).

    Computed as the first used tap plus weighted deviations from it, so equal
    taps reproduce their value exactly.
    """
    shape = np.shape(taps[0][0])
    base = np.zeros(shape)
    have = np.zeros(shape, bool)
    for v, w in taps:
        take = (w > 0) & ~have
        base = np.where(take, v, base)
        have |= take
    acc = np.zeros(shape)
    wsum = np.zeros(shape)
    for v, w in taps:
        acc += np.where(w > 0, w * (v - base), 0.0)
        wsum += w
    return np.where(valid_out, base + acc / np.where(valid_out, wsum, 1.0), np.nan)


def _gather(grid, i0, i1, fx, j0, j1, fy, strict):
    vals = grid.filled(0.0)
    taps = []
    wsum = np.zeros(np.shape(fx))
    bad = np.zeros(np.shape(fx), bool)
    for jj, wy in ((j0, 1.0 - fy), (j1, fy)):
        r = jj - grid.row_start
        inband = (r >= 0) & (r < grid.rows)
        rc = np.clip(r, 0, grid.rows - 1)
        for ii, wx in ((i0, 1.0 - fx), (i1, fx)):
            w = wx * wy
            ok = inband & grid.valid[rc, ii]
            bad |= (w > 0) & ~ok
            w = np.where(ok, w, 0.0)
            taps.append((vals[rc, ii], w))
            wsum += w
    valid = wsum > 0
    if strict:
        valid &= ~bad
    return weighted_taps(taps, valid), valid


def tap_rows(height, zenith):
    """Raster rows touched by bilinear lookups at the given zeniths."""
    y = np.asarray(zenith, float) * (height / 180.0) - 0.5
    j0, j1, fy = _axis_weights(y, height, wrap=False)
    rows = np.concatenate([j0.ravel(), j1[fy > 0].ravel()])
    return np.unique(rows)


def box_downsample(grid, factor, strict=False):
    """Block mean over ``factor x factor`` blocks aligned to the full raster.

    Output dimensions use ceiling division.  Invalid pixels are excluded from
    the mean and all-invalid blocks stay invalid.  With ``strict`` a block is
    kept only when every one of its in-raster pixels is valid.
    """
    if factor == 1:
        return grid.copy()
    f = int(factor)
    W2 = -(-grid.width // f)
    H2 = -(-grid.height // f)
    r0 = grid.row_start // f
    r1 = -(-grid.row_end // f)
    band = grid.crop_rows(r0 * f, min(r1 * f, grid.height))
    shape = ((r1 - r0) * f, W2 * f)
    vals = np.zeros(shape)
    ok = np.zeros(shape, bool)
    inside = np.zeros(shape, bool)
    vals[:band.rows, :grid.width] = band.filled(0.0)
    ok[:band.rows, :grid.width] = band.valid
    inside[:band.rows, :grid.width] = True
    blocks = (r1 - r0, f, W2, f)
    total = vals.reshape(blocks).sum(axis=(1, 3))
    count = ok.reshape(blocks).sum(axis=(1, 3))
    expected = inside.reshape(blocks).sum(axis=(1, 3))
    valid = count == expected if strict else count > 0
    valid &= count > 0
    mean = np.where(valid, total / np.maximum(count, 1), np.nan)
    return EquirectGrid(W2, H2, r0, r1, mean, valid)


def resize_bilinear(grid, width, height, row_start=None, row_end=None):
    """Bilinear resampling to another raster size.

    Output pixel centers are mapped into source pixel coordinates; rows are
    clamped into the source band so the whole requested band is filled.
    Invalid taps are skipped by renormalization.
    """
    if row_start is None:
        row_start = round_half_up(grid.row_start * height / grid.height)
        row_end = max(row_start + 1, round_half_up(grid.row_end * height / grid.height))
    x = (np.arange(width) + 0.5) * (grid.width / width) - 0.5
    y = (np.arange(row_start, row_end) + 0.5) * (grid.height / height) - 0.5
    y = np.clip(y, grid.row_start, grid.row_end - 1)
    j0 = np.floor(y).astype(np.int64)
    fy = y - j0
    j1 = np.minimum(j0 + 1, grid.row_end - 1)
    i0 = np.floor(x).astype(np.int64)
    fx = x - i0
    i1 = (i0 + 1) % grid.width
    i0 = i0 % grid.width
    J0, I0 = np.meshgrid(j0, i0, indexing="ij")
    J1, I1 = np.meshgrid(j1, i1, indexing="ij")
    FY, FX = np.meshgrid(fy, fx, indexing="ij")
    vals, valid = _gather(grid, I0, I1, FX, J0, J1, FY, strict=False)
    return EquirectGrid(width, height, row_start, row_end, vals, valid)
