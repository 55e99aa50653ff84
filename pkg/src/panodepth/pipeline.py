"""End-to-end commands: partition a panorama, stitch estimated views, evaluate, synthesize."""
from __future__ import annotations

import json
import logging
import shlex
import subprocess
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .blending import multiscale_blend
from .errors import ConfigError, MissingFileError
from .geometry import render_view_image, solve_view_for_partition, warp_view_to_equirect
from .grid import resize_bilinear, target_rows
from .metrics import evaluate
from .partitions import grid_from_cuts, padded_pixel_rect
from .registration import RegistrationPoly, apply_poly, fit_poly, sample_pairs
from .synthetic import (BoxRoom, DistortionSpec, degrade_reference, make_distorted_partials,
                        random_distortions, render_room_panorama)

log = logging.getLogger(__name__)


def plan_views(config, width, height):
    """Manifest entries (without writing anything) for a ``width x height`` panorama.

    Each view is solved for its partition grown by the padding, so that the
    padded pixels can be warped back from it.
    """
    grid = grid_from_cuts(config.azimuth_cuts, config.zenith_cuts)
    entries = []
    for k, p in enumerate(grid):
        rect = padded_pixel_rect(p, width, height, config.pad_x, config.pad_y)
        view = solve_view_for_partition(rect.degrees(width, height), config.view_width,
                                        config.view_height, config.fovx_rule)
        entries.append(io.ManifestEntry(k, k // grid.n_cols, k % grid.n_cols, p, view,
                                        f"view_{k:02d}.png", f"depth_{k:02d}.pfm"))
    return io.ViewManifest(width, height, config.pad_x, config.pad_y,
                           list(grid.azimuth_cuts), list(grid.zenith_cuts), entries)


def cmd_partition(rgb_path, config, out_dir):
    """Render one RGB view per partition and write the manifest."""
    image = io.read_png(rgb_path)
    height, width = image.shape[:2]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = plan_views(config, width, height)
    for e in manifest.entries:
        io.write_png(render_view_image(image, e.view), out_dir / e.rgb)
        if config.estimator_command:
            cmd = config.estimator_command.format(rgb=shlex.quote(str(out_dir / e.rgb)),
                                                  depth=shlex.quote(str(out_dir / e.depth)))
            subprocess.run(cmd, shell=True, check=True)
    io.write_manifest(manifest, out_dir / "manifest.json")
    return manifest


def register_partials(partials, reference, grid, degree=3, step=1.0):
    """Fit and apply one registration per partition; returns ``(registered, fits)``."""
    registered, fits = [], []
    for p, part in zip(grid, partials):
        pairs = sample_pairs(part, reference, p, step)
        poly = fit_poly(pairs, degree)
        registered.append(apply_poly(poly, part))
        fits.append({"partition": p.to_dict(), "coefficients": poly.to_dict(), "samples": pairs.count})
    return registered, fits


def stitch_partials(partials, reference, config):
    """Register equirect partials and blend them; returns ``(depth, report)``."""
    t0 = time.perf_counter()
    grid = grid_from_cuts(config.azimuth_cuts, config.zenith_cuts)
    registered, fits = register_partials(partials, reference, grid, config.degree, config.sample_step)
    t1 = time.perf_counter()
    schedule = config.blend_schedule(reference.width, reference.height)
    result = multiscale_blend(registered, reference, schedule, config.wrap_laplacian)
    t2 = time.perf_counter()
    report = {
        "units": "meters",
        "partitions": fits,
        "schedule": [{"width": w, "height": h, "iterations": n}
                     for (w, h), n in zip(schedule.levels, schedule.iterations)],
        "gamma": schedule.gamma,
        "omega": schedule.omega,
        "residual_stop": schedule.residual_stop,
        "levels": [asdict(lv) for lv in result.levels],
        "timings": {"registration": t1 - t0, "blend": t2 - t1},
    }
    return result.depth, report


def load_reference(path, width, height):
    """Reference depth at the working resolution, cropped to the target band."""
    ref = io.read_pfm(path)
    lo, hi = target_rows(height)
    if (ref.width, ref.height) != (width, height):
        ref = resize_bilinear(ref.trimmed(), width, height, lo, hi)
    ref = ref.crop_rows(lo, hi)
    if not ref.valid.all():
        j, i = np.argwhere(~ref.valid)[0]
        raise ConfigError(f"reference has no depth at pixel (col {i}, row {lo + j}) of the target band")
    return ref


def cmd_stitch(manifest_path, reference_path, config, out_path, report_path=None, png_path=None):
    start = time.perf_counter()
    manifest_path = Path(manifest_path)
    manifest = io.read_manifest(manifest_path)
    base = manifest_path.parent
    config = _config_from_manifest(config, manifest)
    W, H = manifest.width, manifest.height
    reference = load_reference(reference_path, W, H)

    missing = [e.depth for e in manifest.entries if not (base / e.depth).exists()]
    if missing:
        raise MissingFileError(f"missing depth file {missing[0]}")
    partials = []
    for e in sorted(manifest.entries, key=lambda e: e.index):
        persp = io.read_pfm_array(base / e.depth).astype(np.float64)
        if persp.shape != (e.view.height, e.view.width):
            raise ConfigError(f"{e.depth} is {persp.shape[1]}x{persp.shape[0]}, "
                              f"view expects {e.view.width}x{e.view.height}")
        rect = padded_pixel_rect(e.partition, W, H, manifest.pad_x, manifest.pad_y)
        partials.append(warp_view_to_equirect(persp, e.view, rect, W, H, config.z_to_range))
    t_warp = time.perf_counter() - start

    depth, report = stitch_partials(partials, reference, config)
    report["timings"]["warp"] = t_warp
    io.write_pfm(depth, out_path)
    if png_path:
        report["png_scale"] = io.write_depth_png(depth.to_full(), png_path)
    report["timings"]["total"] = time.perf_counter() - start
    if report_path:
        Path(report_path).write_text(json.dumps(report, indent=2) + "\n")
    return depth, report


def _config_from_manifest(config, manifest):
    """The manifest's cuts and padding win over the config's."""
    d = config.to_dict()
    d.update(azimuth_cuts=manifest.azimuth_cuts, zenith_cuts=manifest.zenith_cuts,
             pad_x=manifest.pad_x, pad_y=manifest.pad_y)
    return io.PipelineConfig.from_dict(d)


def cmd_eval(pred_path, gt_path):
    """Median-scale the prediction and return the metrics record text."""
    pred = io.read_pfm(pred_path)
    gt = io.read_pfm(gt_path)
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise ConfigError(f"dimension mismatch: {pred.width}x{pred.height} vs {gt.width}x{gt.height}")
    return evaluate(pred, gt).record()


def cmd_synth(out_dir, room=None, width=512, height=256, seed=7, config=None,
              identity=False, noise_sigma=0.0, down_factor=4, blur_radius=2, views=False):
    """Write a synthetic fixture set.

    Always written: ``gt.pfm``, ``reference.pfm`` (degraded gt) and
    ``partials/partial_XX.pfm`` (distorted gt cut to padded partitions).  With
    ``views`` also perspective depth maps plus ``manifest.json`` ready for
    :func:`cmd_stitch`.
    """
    room = room or BoxRoom()
    config = config or io.PipelineConfig()
    out_dir = Path(out_dir)
    (out_dir / "partials").mkdir(parents=True, exist_ok=True)
    grid = grid_from_cuts(config.azimuth_cuts, config.zenith_cuts)
    gt = render_room_panorama(room, width, height)
    if identity:
        polys = [RegistrationPoly.identity()] * len(grid)
    else:
        polys = random_distortions(len(grid), seed)
    spec = DistortionSpec(polys, noise_sigma, seed)
    partials = make_distorted_partials(gt, grid, spec, config.pad_x, config.pad_y)
    reference = degrade_reference(gt, down_factor, blur_radius)
    io.write_pfm(gt, out_dir / "gt.pfm")
    io.write_pfm(reference, out_dir / "reference.pfm")
    for k, part in enumerate(partials):
        io.write_pfm(part, out_dir / "partials" / f"partial_{k:02d}.pfm")
    info = {"room": asdict(room), "width": width, "height": height, "seed": seed,
            "noise_sigma": noise_sigma, "down_factor": down_factor, "blur_radius": blur_radius,
            "distortions": [p.to_dict() for p in polys]}
    if views:
        manifest = plan_views(config, width, height)
        rng = np.random.default_rng([seed, len(grid)])
        for e, poly in zip(manifest.entries, polys):
            rays, u, v = e.view.pixel_rays()
            secant = np.sqrt(1.0 + u * u + v * v)
            depth = poly(room.ray_range(rays / secant[..., None]))
            if noise_sigma > 0:
                depth = depth + rng.normal(0.0, noise_sigma, depth.shape)
            # estimators emit planar depth
            io.write_pfm_array(depth / secant if config.z_to_range else depth, out_dir / e.depth)
        io.write_manifest(manifest, out_dir / "manifest.json")
    (out_dir / "synth.json").write_text(json.dumps(info, indent=2) + "\n")
    return gt, partials, reference
