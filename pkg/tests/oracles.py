"""Independent reference implementations used by the tests.

Everything here is written from the definitions with plain loops or dense
linear algebra and shares no code with the package beyond its data types.
"""
import math

import numpy as np


# ---------------------------------------------------------------- geometry

def unit(azimuth, zenith):
    p, t = math.radians(azimuth), math.radians(zenith)
    return np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])


def view_axes(azimuth, zenith):
    m = unit(azimuth, zenith)
    p = math.radians(azimuth)
    left = np.array([-math.sin(p), math.cos(p), 0.0])
    return m, left, np.cross(m, left)


def plane_uv(view_az, view_zen, d):
    m, left, up = view_axes(view_az, view_zen)
    z = d @ m
    return (d @ left) / z, (d @ up) / z, z


def boundary_directions(p, step=0.1):
    """Unit directions along the four edges of a partition, every ``step`` degrees."""
    def span(a, b):
        n = int(round((b - a) / step))
        return np.linspace(a, b, n + 1)

    az = span(p.phi0, p.phi1)
    zen = span(p.theta0, p.theta1)
    pts = [(a, p.theta0) for a in az] + [(a, p.theta1) for a in az]
    pts += [(p.phi0, z) for z in zen] + [(p.phi1, z) for z in zen]
    return np.array([unit(a, z) for a, z in pts])


def frustum_margin(view_az, view_zen, fov_x, fov_y, dirs):
    """Smallest ``tan(fov/2) - |coord|`` over the directions (negative = outside)."""
    u, v, z = plane_uv(view_az, view_zen, dirs)
    if np.any(z <= 0):
        return -np.inf
    tx = math.tan(math.radians(fov_x) / 2)
    ty = math.tan(math.radians(fov_y) / 2)
    return float(min(np.min(tx - np.abs(u)), np.min(ty - np.abs(v))))


# ---------------------------------------------------------------- blending

def laplacian_loops(x, valid):
    h, w = x.shape
    out = np.full((h, w), np.nan)
    for j in range(1, h - 1):
        for i in range(1, w - 1):
            nb = [(j, i), (j - 1, i), (j + 1, i), (j, i - 1), (j, i + 1)]
            if all(valid[a, b] for a, b in nb):
                out[j, i] = 4 * x[j, i] - x[j - 1, i] - x[j + 1, i] - x[j, i - 1] - x[j, i + 1]
    return out


def dense_blend_solve(X, L, target_ok, ref_ok, gamma):
    """Unconstrained minimizer of sum_T (Kx - L)^2 + gamma sum_U (x - X)^2.

    ``T`` holds the pixels with a target whose 5-point stencil lies inside the
    reference's valid set (no horizontal wrap).  Returns the solution on the
    valid pixels in row-major order, plus the index map.
    """
    h, w = X.shape
    idx = -np.ones((h, w), int)
    cells = [(j, i) for j in range(h) for i in range(w) if ref_ok[j, i]]
    for k, (j, i) in enumerate(cells):
        idx[j, i] = k
    n = len(cells)
    rows, rhs = [], []
    for j in range(1, h - 1):
        for i in range(1, w - 1):
            nb = [(j - 1, i), (j + 1, i), (j, i - 1), (j, i + 1)]
            if target_ok[j, i] and ref_ok[j, i] and all(ref_ok[a, b] for a, b in nb):
                r = np.zeros(n)
                r[idx[j, i]] = 4.0
                for a, b in nb:
                    r[idx[a, b]] = -1.0
                rows.append(r)
                rhs.append(L[j, i])
    K = np.array(rows).reshape(-1, n)
    A = K.T @ K + gamma * np.eye(n)
    b = K.T @ np.array(rhs) + gamma * np.array([X[j, i] for j, i in cells])
    return np.linalg.solve(A, b), idx


def sparse_blend_solve(X, L, target_ok, gamma):
    """Same minimizer as :func:`dense_blend_solve` for a fully valid ``X``, via a sparse factorization."""
    from scipy.sparse import coo_matrix, identity
    from scipy.sparse.linalg import spsolve

    h, w = X.shape
    idx = np.arange(h * w).reshape(h, w)
    ok = np.zeros((h, w), bool)
    ok[1:-1, 1:-1] = target_ok[1:-1, 1:-1]
    centers = idx[ok]
    m = len(centers)
    r = np.arange(m)
    rows = np.concatenate([r] * 5)
    cols = np.concatenate([centers, centers - w, centers + w, centers - 1, centers + 1])
    vals = np.concatenate([np.full(m, 4.0)] + [np.full(m, -1.0)] * 4)
    K = coo_matrix((vals, (rows, cols)), shape=(m, h * w)).tocsr()
    A = (K.T @ K + gamma * identity(h * w)).tocsc()
    b = K.T @ L[ok] + gamma * X.ravel()
    return spsolve(A, b).reshape(h, w)


def dense_objective(x, X, L, target_ok, ref_ok, gamma):
    h, w = X.shape
    e = 0.0
    for j in range(h):
        for i in range(w):
            if ref_ok[j, i]:
                e += gamma * (x[j, i] - X[j, i]) ** 2
    lap = laplacian_loops(x, ref_ok)
    for j in range(h):
        for i in range(w):
            if target_ok[j, i] and np.isfinite(lap[j, i]):
                e += (lap[j, i] - L[j, i]) ** 2
    return e


# ---------------------------------------------------------------- metrics

def lower_median(values):
    s = sorted(values)
    return s[(len(s) - 1) // 2]


def brute_metrics(pred, gt):
    """Per-pixel loop over 2-D arrays (NaN = invalid), no scaling."""
    keep, logs = [], []
    for p, g in zip(np.ravel(pred), np.ravel(gt)):
        if math.isfinite(p) and math.isfinite(g) and g > 0:
            keep.append((float(p), float(g)))
            if p > 0:
                logs.append((float(p), float(g)))
    n = len(keep)
    out = {
        "rmse": math.sqrt(math.fsum((p - g) ** 2 for p, g in keep) / n),
        "mae": math.fsum(abs(p - g) for p, g in keep) / n,
        "absrel": math.fsum(abs(p - g) / g for p, g in keep) / n,
        "rmse_log10": math.sqrt(math.fsum((math.log10(p) - math.log10(g)) ** 2 for p, g in logs)
                                / len(logs)),
    }
    for k in (1, 2, 3):
        hits = sum(1 for p, g in logs if max(p / g, g / p) < 1.25 ** k)
        out[f"delta{k}"] = hits / len(logs)
    out["pixels"] = n
    return out


KERNEL_A = [[0, 0, 1, 0, 0], [0, 1, 2, 1, 0], [1, 2, -16, 2, 1], [0, 1, 2, 1, 0], [0, 0, 1, 0, 0]]


def conv5_loops(a, valid, kernel):
    """Correlation with a 5x5 kernel; entries whose window is not all valid are None."""
    h, w = a.shape
    out = [[None] * (w - 4) for _ in range(h - 4)]
    for j in range(h - 4):
        for i in range(w - 4):
            if all(valid[j + s, i + t] for s in range(5) for t in range(5)):
                out[j][i] = math.fsum(kernel[s][t] * float(a[j + s, i + t])
                                      for s in range(5) for t in range(5))
    return out


def brute_laplacian_metrics(pred, gt):
    pv, gv = np.isfinite(pred), np.isfinite(gt)
    res = []
    for sign in (1, -1):
        kern = [[sign * c for c in row] for row in KERNEL_A]
        fp = conv5_loops(pred, pv, kern)
        fg = conv5_loops(gt, gv, kern)
        diffs = [abs(a - b) for ra, rb in zip(fp, fg) for a, b in zip(ra, rb)
                 if a is not None and b is not None]
        res.append(math.fsum(diffs) / len(diffs))
    return tuple(res)


def oracle_record(pred, gt):
    """Metrics record text after median scaling, computed loop by loop."""
    joint = [(p, g) for p, g in zip(np.ravel(pred), np.ravel(gt)) if math.isfinite(p) and math.isfinite(g)]
    ratio = lower_median([g for _, g in joint]) / lower_median([p for p, _ in joint])
    scaled = np.where(np.isfinite(pred), pred * ratio, np.nan)
    m = brute_metrics(scaled, gt)
    m["lap_mae"], m["log_mae"] = brute_laplacian_metrics(scaled, gt)
    keys = ("rmse", "mae", "absrel", "rmse_log10", "delta1", "delta2", "delta3",
            "lap_mae", "log_mae")
    lines = [f"{k} {m[k]:.10g}" for k in keys] + [f"pixels {m['pixels']}"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- synthetic

def ray_march(half_extents, camera, d, step=1e-4):
    """First distance at which ``camera + t d`` leaves the box, by stepping."""
    h = np.asarray(half_extents, float)
    c = np.asarray(camera, float)
    d = np.asarray(d, float)
    top = 2.0 * float(np.linalg.norm(h)) + float(np.linalg.norm(c))
    t = np.arange(0.0, top, step)
    pts = c + t[:, None] * d
    inside = np.all(np.abs(pts) <= h, axis=1)
    k = int(np.argmin(inside))
    return t[k - 1] + step / 2
