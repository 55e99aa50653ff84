"""End-to-end run on a box room: synthesize views, stitch, and print metrics."""
import argparse
import tempfile
from pathlib import Path

from panodepth import io
from panodepth.io import PipelineConfig
from panodepth.metrics import evaluate
from panodepth.pipeline import cmd_stitch, cmd_synth


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--width", type=int, default=512)
    ap.add_argument("--height", type=int, default=256)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--exact-reference", action="store_true", help="register against the ground truth")
    ap.add_argument("--view-width", type=int, default=1024)
    ap.add_argument("--view-height", type=int, default=989)
    ap.add_argument("--out", help="keep the fixtures here instead of a temporary directory")
    args = ap.parse_args()

    config = PipelineConfig(view_width=args.view_width, view_height=args.view_height)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(args.out or tmp)
        cmd_synth(out, width=args.width, height=args.height, seed=args.seed, config=config,
                  noise_sigma=args.noise, views=True)
        ref = out / ("gt.pfm" if args.exact_reference else "reference.pfm")
        depth, report = cmd_stitch(out / "manifest.json", ref, config, out / "stitched.pfm")
        gt = io.read_pfm(out / "gt.pfm").crop_rows(depth.row_start, depth.row_end)
        print(evaluate(depth, gt).record(), end="")
        print(f"seconds {report['timings']['total']:.2f}")


if __name__ == "__main__":
    main()
