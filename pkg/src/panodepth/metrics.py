"""Depth-map evaluation: median scaling, error/accuracy metrics, Laplacian sharpness."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import MetricsError, ScalingError

KERNEL_LAPLACIAN_5 = np.array([
    [0, 0, 1, 0, 0],
    [0, 1, 2, 1, 0],
    [1, 2, -16, 2, 1],
    [0, 1, 2, 1, 0],
    [0, 0, 1, 0, 0],
], dtype=float)

KERNEL_LOG_5 = -KERNEL_LAPLACIAN_5

RECORD_KEYS = ("rmse", "mae", "absrel", "rmse_log10", "delta1", "delta2", "delta3",
               "lap_mae", "log_mae", "pixels")


@dataclass
class MetricsReport:
    rmse: float
    mae: float
    absrel: float
    rmse_log10: float
    delta1: float
    delta2: float
    delta3: float
    lap_mae: float = 0.0
    log_mae: float = 0.0
    pixel_count: int = 0

    def record(self):
        """``key value`` lines in the fixed key order."""
        d = asdict(self)
        d["pixels"] = d.pop("pixel_count")
        lines = []
        for k in RECORD_KEYS:
            v = d[k]
            lines.append(f"{k} {v}" if isinstance(v, int) else f"{k} {v:.10g}")
        return "\n".join(lines) + "\n"


def _mean(a):
    return math.fsum(np.asarray(a, float).ravel()) / a.size


def _joint(pred, gt):
    if pred.shape != gt.shape or (pred.width, pred.height) != (gt.width, gt.height):
        raise MetricsError(f"shape mismatch {pred.shape} vs {gt.shape}")
    return pred.valid & gt.valid


def lower_median(a):
    a = np.sort(np.asarray(a, float).ravel())
    return float(a[(a.size - 1) // 2])


def median_scale(pred, gt):
    """Scale ``pred`` by median(gt) / median(pred) over jointly valid pixels."""
    mask = _joint(pred, gt)
    if not mask.any():
        raise ScalingError("no jointly valid pixels")
    mp = lower_median(pred.values[mask])
    mg = lower_median(gt.values[mask])
    if not (mp > 0 and np.isfinite(mp) and np.isfinite(mg)):
        raise ScalingError(f"cannot scale by median(gt)={mg} / median(pred)={mp}")
    ratio = mg / mp
    # a rescaled map's ratio is 1 up to rounding; keeping it bit-identical makes this idempotent
    if abs(ratio - 1.0) <= 8 * np.finfo(float).eps:
        return pred.copy()
    return pred.with_values(pred.values * ratio)


def error_metrics(pred, gt):
    """RMSE, MAE, AbsRel, RMSE in log10 and the delta accuracies.

    Pixels count when valid in both and ``gt > 0``; the log and delta terms
    additionally need ``pred > 0``.
    """
    mask = _joint(pred, gt) & (gt.filled(0.0) > 0)
    if not mask.any():
        raise MetricsError("no jointly valid pixels with positive ground truth")
    p = pred.values[mask]
    g = gt.values[mask]
    diff = p - g
    pos = p > 0
    rmse = math.sqrt(_mean(diff * diff))
    mae = _mean(np.abs(diff))
    absrel = _mean(np.abs(diff) / g)
    if pos.any():
        lg = np.log10(p[pos]) - np.log10(g[pos])
        rmse_log = math.sqrt(_mean(lg * lg))
        ratio = np.maximum(p[pos] / g[pos], g[pos] / p[pos])
        deltas = [np.count_nonzero(ratio < 1.25 ** k) / ratio.size for k in (1, 2, 3)]
    else:
        rmse_log = math.inf
        deltas = [0.0, 0.0, 0.0]
    return MetricsReport(rmse, mae, absrel, rmse_log, *deltas, pixel_count=int(mask.sum()))


def _filter_valid(values, valid, kernel):
    win = sliding_window_view(values, kernel.shape)
    ok = sliding_window_view(valid, kernel.shape).all(axis=(-2, -1))
    return np.einsum("ijkl,kl->ij", win, kernel), ok


def laplacian_metrics(pred, gt):
    """Mean absolute differences of 5x5 Laplacian and LoG responses.

    Only pixels whose full 5x5 window is valid in both rasters count.
    """
    _joint(pred, gt)
    if min(pred.shape) < KERNEL_LAPLACIAN_5.shape[0]:
        raise MetricsError(f"grid {pred.shape} is smaller than the 5x5 window")
    pv, gv = pred.filled(0.0), gt.filled(0.0)
    out = []
    for kernel in (KERNEL_LAPLACIAN_5, KERNEL_LOG_5):
        fp, okp = _filter_valid(pv, pred.valid, kernel)
        fg, okg = _filter_valid(gv, gt.valid, kernel)
        ok = okp & okg
        if not ok.any():
            raise MetricsError("no pixel has a fully valid 5x5 window")
        out.append(_mean(np.abs(fp[ok] - fg[ok])))
    return tuple(out)


def evaluate(pred, gt, scale=True):
    """Full report, median-scaling ``pred`` first unless told otherwise."""
    if scale:
        pred = median_scale(pred, gt)
    report = error_metrics(pred, gt)
    report.lap_mae, report.log_mae = laplacian_metrics(pred, gt)
    return report
