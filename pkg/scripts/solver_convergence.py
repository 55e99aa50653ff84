"""Residual history of one blend at a chosen resolution, optionally against the exact minimizer."""
import argparse
import sys
import tempfile
from pathlib import Path

import numpy as np

from panodepth.blending import assemble_targets, multiscale_blend
from panodepth.io import PipelineConfig
from panodepth.partitions import default_grid
from panodepth.pipeline import cmd_synth, register_partials


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--width", type=int, default=512)
    ap.add_argument("--height", type=int, default=256)
    ap.add_argument("--noise", type=float, default=0.02)
    ap.add_argument("--sweeps", type=int, default=None, help="override the finest-level budget")
    ap.add_argument("--exact", action="store_true", help="compare with a sparse direct solve (needs scipy)")
    args = ap.parse_args()

    config = PipelineConfig(residual_stop=0.0)
    with tempfile.TemporaryDirectory() as tmp:
        gt, partials, ref = cmd_synth(tmp, width=args.width, height=args.height, noise_sigma=args.noise)
    registered, _ = register_partials(partials, ref, default_grid())
    schedule = config.blend_schedule(args.width, args.height)
    if args.sweeps:
        schedule.iterations[-1] = args.sweeps
    result = multiscale_blend(registered, ref, schedule)
    for lv in result.levels:
        h = np.asarray(lv.residuals)
        print(f"level {lv.width}x{lv.height}: {lv.iterations} sweeps, {lv.seconds:.2f} s, "
              f"energy {lv.objective_start:.4g} -> {lv.objective_end:.4g}")
        for k in range(0, len(h), max(1, len(h) // 10)):
            print(f"  sweep {k:5d}  residual {h[k]:.4g}  ({100 * h[k] / h[0]:.3f}% of initial)")
    err = result.depth.values - gt.values
    print(f"RMSE vs ground truth {np.sqrt(np.mean(err ** 2)):.4f}")
    if args.exact:
        sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
        from oracles import sparse_blend_solve

        tgt = assemble_targets(registered, args.width, args.height).values.crop_rows(gt.row_start, gt.row_end)
        sol = sparse_blend_solve(ref.values, tgt.filled(0.0), tgt.valid, config.gamma)
        print(f"exact minimizer RMSE vs ground truth {np.sqrt(np.mean((sol - gt.values) ** 2)):.4f}")
        print(f"blend vs exact minimizer RMS {np.sqrt(np.mean((result.depth.values - sol) ** 2)):.4f}")


if __name__ == "__main__":
    main()
