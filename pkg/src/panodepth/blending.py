"""Laplacian-domain blending of registered partitions.

The blended panorama ``x`` minimizes

    E(x) = sum_T (K x - L)^2 + gamma * sum_U (x - X)^2,   x >= 0

where ``K`` is the 5-point Laplacian restricted to pixels ``T`` with a
target, ``L`` the averaged target Laplacians, ``X`` the reference and ``U``
the reference's valid pixels.  It is solved by projected, damped Jacobi
sweeps on the normal equations ``(K^T K + gamma I) x = K^T L + gamma X``,
coarse to fine.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .errors import AssemblyError, ConfigError, NumericError
from .grid import EquirectGrid, box_downsample, resize_bilinear, target_rows

log = logging.getLogger(__name__)

PARALLEL_MIN_PIXELS = 1 << 16

# how a coarse solution seeds the next level: "values" upsamples it directly,
# "correction" adds its upsampled difference from the coarse reference to the
# fine reference (so a level already at its fixed point passes it on exactly)
HANDOFFS = ("correction", "values")

# Jacobi uses D = max(diag(A), (absolute row sum of A) / GERSHGORIN_RATIO).  In
# the deep interior both give 20; near the edges of the solve region the plain
# diagonal gets small and damped Jacobi can diverge.  With this floor the
# eigenvalues of D^-1 A stay below 3.2, so omega < 0.625 converges and
# decreases the objective every sweep.
GERSHGORIN_RATIO = 3.2


@dataclass
class LaplacianTarget:
    values: EquirectGrid
    counts: np.ndarray


@dataclass
class BlendSchedule:
    """Pyramid sizes and iteration budgets, both ordered coarse to fine."""

    levels: list
    iterations: list
    gamma: float = 1e-4
    omega: float = 0.5
    residual_stop: float = 1e-3
    handoff: str = "correction"

    def __post_init__(self):
        self.levels = [tuple(int(n) for n in lv) for lv in self.levels]
        self.iterations = [int(n) for n in self.iterations]
        if not self.levels or len(self.levels) != len(self.iterations):
            raise ConfigError("schedule needs one iteration count per level")
        for (w0, h0), (w1, h1) in zip(self.levels, self.levels[1:]):
            if (w0, h0) != (-(-w1 // 2), -(-h1 // 2)):
                raise ConfigError(f"level {w0}x{h0} is not the half of {w1}x{h1}")
        if any(n < 0 for n in self.iterations):
            raise ConfigError("iteration counts must be nonnegative")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.omega <= 1:
            raise ConfigError(f"omega must lie in (0, 1], got {self.omega}")
        if self.handoff not in HANDOFFS:
            raise ConfigError(f"handoff must be one of {HANDOFFS}, got {self.handoff!r}")

    @classmethod
    def auto(cls, width, height, **kw):
        """Halve until the short side is <= 256 (at most 4 levels).

        The finest level gets 50 sweeps, each coarser one 50 more, and the
        coarsest level of a multi-level pyramid 200.
        """
        levels = [(width, height)]
        while min(levels[-1]) > 256 and len(levels) < 4:
            w, h = levels[-1]
            levels.append((-(-w // 2), -(-h // 2)))
        iters = [50 * (k + 1) for k in range(len(levels))]
        if len(levels) > 1:
            iters[-1] = 200
        return cls(levels[::-1], iters[::-1], **kw)

    def to_dict(self):
        return {"levels": [list(lv) for lv in self.levels], "iterations": list(self.iterations),
                "gamma": self.gamma, "omega": self.omega, "residual_stop": self.residual_stop,
                "handoff": self.handoff}


@dataclass
class LevelReport:
    width: int
    height: int
    budget: int
    iterations: int
    residuals: list
    seconds: float
    objective_start: float
    objective_end: float


@dataclass
class BlendResult:
    depth: EquirectGrid
    levels: list = field(default_factory=list)


def _shift(a, dj, di, wrap, fill=0):
    """``out[j, i] = a[j + dj, i + di]``; rows never wrap, columns optionally do."""
    out = np.full_like(a, fill)
    h, w = a.shape
    src = a
    if di:
        if wrap:
            src = np.roll(a, -di, axis=1)
        else:
            src = np.full_like(a, fill)
            if di > 0:
                src[:, :w - di] = a[:, di:]
            else:
                src[:, -di:] = a[:, :w + di]
    if dj > 0:
        out[:h - dj] = src[dj:]
    elif dj < 0:
        out[-dj:] = src[:h + dj]
    else:
        out[:] = src
    return out


_NEIGHBORS = ((0, -1), (0, 1), (-1, 0), (1, 0))


def _laplacian_array(x, ok, wrap):
    lap = 4.0 * x
    good = ok.copy()
    for dj, di in _NEIGHBORS:
        lap = lap - _shift(x, dj, di, wrap)
        good &= _shift(ok, dj, di, wrap, fill=False)
    return lap, good


def laplacian_field(g, wrap=False):
    """5-point Laplacian wherever a pixel and its four neighbors are valid.

    Without ``wrap`` the first and last columns have no Laplacian.
    """
    lap, good = _laplacian_array(g.filled(0.0), g.valid, wrap)
    return g.with_values(np.where(good, lap, np.nan), good)


def assemble_targets(partials, width, height, wrap=False):
    """Average the partials' Laplacians where they overlap."""
    partials = list(partials)
    if not partials:
        raise AssemblyError("no partials to assemble")
    r0 = min(p.row_start for p in partials)
    r1 = max(p.row_end for p in partials)
    total = np.zeros((r1 - r0, width))
    counts = np.zeros((r1 - r0, width), np.int64)
    for p in partials:
        if (p.width, p.height) != (width, height):
            raise AssemblyError(f"partial is {p.width}x{p.height}, canvas {width}x{height}")
        lap = laplacian_field(p, wrap)
        sl = slice(p.row_start - r0, p.row_end - r0)
        total[sl] += lap.filled(0.0)
        counts[sl] += lap.valid
    valid = counts > 0
    lo, hi = target_rows(height)
    band = valid[max(lo - r0, 0):max(hi - r0, 0)]
    if not band[:, 1:-1].any():
        raise AssemblyError("no partial covers any pixel of the target-domain interior")
    mean = np.where(valid, total / np.maximum(counts, 1), np.nan)
    return LaplacianTarget(EquirectGrid(width, height, r0, r1, mean, valid), counts)


def _jacobi_impl(x, X, L, T, U, D, gamma, omega, max_iters, stop, wrap, hist):
    h, w = x.shape
    q = np.zeros((h, w))
    r = np.zeros((h, w))
    rowsum = np.zeros(h)
    n = 0
    for j in range(h):
        for i in range(w):
            if U[j, i]:
                n += 1
    it = 0
    first = 0.0
    while True:
        for j in prange(h):
            for i in range(w):
                if T[j, i]:
                    il = i - 1 if i > 0 else w - 1
                    ir = i + 1 if i < w - 1 else 0
                    q[j, i] = (4.0 * x[j, i] - x[j, il] - x[j, ir]
                               - x[j - 1, i] - x[j + 1, i] - L[j, i])
                else:
                    q[j, i] = 0.0
        for j in prange(h):
            s = 0.0
            for i in range(w):
                if U[j, i]:
                    acc = 4.0 * q[j, i]
                    if i > 0:
                        acc -= q[j, i - 1]
                    elif wrap:
                        acc -= q[j, w - 1]
                    if i < w - 1:
                        acc -= q[j, i + 1]
                    elif wrap:
                        acc -= q[j, 0]
                    if j > 0:
                        acc -= q[j - 1, i]
                    if j < h - 1:
                        acc -= q[j + 1, i]
                    rv = -(acc + gamma * (x[j, i] - X[j, i]))
                    r[j, i] = rv
                    s += rv * rv
            rowsum[j] = s
        total = 0.0
        for j in range(h):
            total += rowsum[j]
        rms = np.sqrt(total / max(n, 1))
        hist[it] = rms
        if it == 0:
            first = rms
        if not np.isfinite(rms) or rms <= stop * first or it >= max_iters:
            break
        for j in prange(h):
            for i in range(w):
                if U[j, i]:
                    v = x[j, i] + omega * r[j, i] / D[j, i]
                    x[j, i] = v if v > 0.0 else 0.0
        it += 1
    return it


_jacobi_serial = njit(cache=True)(_jacobi_impl)
_jacobi_parallel = njit(cache=True, parallel=True)(_jacobi_impl)


def _system(target, reference, wrap):
    """Arrays on the reference band: X, L, T, U and the Jacobi diagonal (without gamma)."""
    U = reference.valid.copy()
    X = reference.filled(0.0)
    tgt = target.values.crop_rows(reference.row_start, reference.row_end)
    T = tgt.valid & U
    for dj, di in _NEIGHBORS:
        T &= _shift(U, dj, di, wrap, fill=False)
    L = np.where(T, tgt.filled(0.0), 0.0)
    Tf = T.astype(float)
    rows_in = sum(_shift(Tf, dj, di, wrap) for dj, di in _NEIGHBORS)
    # diag(K^T K): 16 from a pixel's own row, 1 per neighboring row
    diag = 16.0 * Tf + rows_in
    # every K row has absolute sum 8, which bounds the absolute row sums of K^T K
    abs_rows = 8.0 * (4.0 * Tf + rows_in)
    return X, L, T, U, np.maximum(diag, abs_rows / GERSHGORIN_RATIO)


def objective(x, target, reference, gamma, wrap=False):
    """Energy of a candidate solution (computed in numpy, independent of the kernel)."""
    X, L, T, U, _ = _system(target, reference, wrap)
    xv = x.crop_rows(reference.row_start, reference.row_end).filled(0.0)
    lap, _ = _laplacian_array(xv, np.ones_like(U), wrap)
    return float(np.sum(np.where(T, lap - L, 0.0) ** 2) + gamma * np.sum(np.where(U, xv - X, 0.0) ** 2))


def jacobi_level_solve(target, reference, init, gamma=1e-4, omega=0.5, max_iters=50,
                       residual_stop=1e-3, wrap=False):
    """Projected damped Jacobi on one level.

    Returns ``(solution, iterations_used, residual_history)`` where the history
    holds the RMS normal-equation residual before each sweep and after the last.
    """
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    if (target.values.width, target.values.height) != (reference.width, reference.height):
        raise ConfigError("target and reference dimensions differ")
    if (init.width, init.height) != (reference.width, reference.height):
        raise ConfigError("init and reference dimensions differ")
    X, L, T, U, D = _system(target, reference, wrap)
    D = D + gamma
    x0 = init.crop_rows(reference.row_start, reference.row_end)
    x = np.where(x0.valid, x0.values, X)
    x = np.where(U, x, 0.0)
    for name, arr in (("init", x), ("target", L), ("reference", X)):
        _check_finite(arr, reference.row_start, name)
    hist = np.zeros(int(max_iters) + 1)
    kernel = _jacobi_parallel if U.size >= PARALLEL_MIN_PIXELS else _jacobi_serial
    used = kernel(x, X, L, T, U, D, float(gamma), float(omega), int(max_iters),
                  float(residual_stop), bool(wrap), hist)
    history = hist[:used + 1].tolist()
    _check_finite(x, reference.row_start, "solution")
    if not np.isfinite(history[-1]):
        r = normal_residual(x, X, L, T, U, gamma, wrap)
        _check_finite(r, reference.row_start, "residual")
        j, i = np.unravel_index(np.argmax(np.abs(r)), r.shape)
        raise NumericError(f"residual norm overflowed; largest residual {r[j, i]:.3g} at pixel "
                           f"(col {i}, row {reference.row_start + j})")
    out = reference.with_values(np.where(U, x, np.nan), U)
    return out, used, history


def normal_residual(x, X, L, T, U, gamma, wrap=False):
    """``b - A x`` on the valid pixels (zero elsewhere), in plain numpy."""
    lap, _ = _laplacian_array(x, np.ones_like(U), wrap)
    q = np.where(T, lap - L, 0.0)
    ktq, _ = _laplacian_array(q, np.ones_like(U), wrap)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(U, -(ktq + gamma * (x - X)), 0.0)


def _check_finite(arr, row_start, name):
    bad = ~np.isfinite(arr)
    if bad.any():
        j, i = np.argwhere(bad)[0]
        raise NumericError(f"non-finite {name} value at pixel (col {i}, row {row_start + j})")


def downsample2(g, strict=False):
    return box_downsample(g, 2, strict=strict)


def upsample2(g, width, height, row_start=None, row_end=None):
    return resize_bilinear(g, width, height, row_start, row_end)


def multiscale_blend(partials, reference, schedule, wrap=False):
    """Solve coarse to fine; each level starts from the coarser solution (see ``HANDOFFS``)."""
    partials = list(partials)
    if schedule.levels[-1] != (reference.width, reference.height):
        raise ConfigError(f"finest level {schedule.levels[-1]} differs from reference "
                          f"{reference.width}x{reference.height}")
    refs = [reference]
    parts = [partials]
    for _ in schedule.levels[:-1]:
        refs.append(downsample2(refs[-1]))
        # only complete blocks, so a cut-up reference stays a cut-up reference
        parts.append([downsample2(p, strict=True) for p in parts[-1]])
    refs.reverse()
    parts.reverse()

    reports = []
    x = None
    for (w, h), budget, ref, lvl_parts in zip(schedule.levels, schedule.iterations, refs, parts):
        start = time.perf_counter()
        lvl_parts = [p for p in lvl_parts if p.valid.any()]
        target = assemble_targets(lvl_parts, w, h, wrap)
        init = ref if x is None else _handoff(x, prev_ref, ref, schedule.handoff)
        e0 = objective(init, target, ref, schedule.gamma, wrap)
        x, used, hist = jacobi_level_solve(target, ref, init, schedule.gamma, schedule.omega,
                                           budget, schedule.residual_stop, wrap)
        e1 = objective(x, target, ref, schedule.gamma, wrap)
        secs = time.perf_counter() - start
        log.info("level %dx%d: %d/%d sweeps, residual %.3g -> %.3g (%.2fs)",
                 w, h, used, budget, hist[0], hist[-1], secs)
        reports.append(LevelReport(w, h, budget, used, hist, secs, e0, e1))
        prev_ref = ref
    return BlendResult(x, reports)


def _handoff(x, coarse_ref, ref, mode):
    if mode == "values":
        return upsample2(x, ref.width, ref.height, ref.row_start, ref.row_end)
    delta = x.with_values(x.values - coarse_ref.crop_rows(x.row_start, x.row_end).values)
    up = upsample2(delta, ref.width, ref.height, ref.row_start, ref.row_end)
    return ref.with_values(ref.values + np.where(up.valid, up.values, 0.0))
