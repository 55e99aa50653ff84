"""Command line entry point: ``panodepth {partition,stitch,eval,synth}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import io, pipeline
from .errors import PanoDepthError
from .synthetic import BoxRoom


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _add_config_flags(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--azimuth-cuts", type=_floats, help="comma separated degrees")
    p.add_argument("--zenith-cuts", type=_floats, help="comma separated degrees")
    p.add_argument("--pad-x", type=int)
    p.add_argument("--pad-y", type=int)
    p.add_argument("--degree", type=int, choices=(1, 2, 3))
    p.add_argument("--sample-step", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--residual-stop", type=float)
    p.add_argument("--view-width", type=int)
    p.add_argument("--view-height", type=int)
    p.add_argument("--fovx-rule", choices=("tight", "corner"))
    p.add_argument("--no-z-to-range", dest="z_to_range", action="store_const", const=False)
    p.add_argument("--wrap-laplacian", action="store_const", const=True)


def _config(args):
    keys = ("azimuth_cuts", "zenith_cuts", "pad_x", "pad_y", "degree", "sample_step", "gamma",
            "omega", "residual_stop", "view_width", "view_height", "fovx_rule", "z_to_range",
            "wrap_laplacian")
    return io.load_config(args.config, **{k: getattr(args, k) for k in keys})


def build_parser():
    parser = argparse.ArgumentParser(prog="panodepth", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="render perspective RGB views and a manifest")
    p.add_argument("rgb", help="equirectangular RGB panorama (PNG)")
    p.add_argument("out_dir")
    _add_config_flags(p)

    p = sub.add_parser("stitch", help="register and blend estimated view depths")
    p.add_argument("manifest")
    p.add_argument("reference", help="reference panoramic depth (PFM)")
    p.add_argument("out", help="output depth (PFM)")
    p.add_argument("--report", help="write the run report (JSON) here")
    p.add_argument("--png", help="also write a 16-bit depth PNG (millimeters)")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="median-scaled metrics of a prediction")
    p.add_argument("pred")
    p.add_argument("gt")

    p = sub.add_parser("synth", help="write a synthetic box-room fixture set")
    p.add_argument("out_dir")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--half-extents", type=_floats, default=[3.0, 2.5, 1.5])
    p.add_argument("--camera", type=_floats, default=[0.4, -0.3, 0.1])
    p.add_argument("--identity", action="store_true", help="no distortion")
    p.add_argument("--noise", type=float, default=0.0, help="gaussian noise sigma in meters")
    p.add_argument("--down-factor", type=int, default=4)
    p.add_argument("--blur-radius", type=int, default=2)
    p.add_argument("--views", action="store_true", help="also write view depths and a manifest")
    _add_config_flags(p)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "partition":
            m = pipeline.cmd_partition(args.rgb, _config(args), args.out_dir)
            print(f"wrote {len(m.entries)} views to {args.out_dir}")
        elif args.command == "stitch":
            _, report = pipeline.cmd_stitch(args.manifest, args.reference, _config(args), args.out,
                                            args.report, args.png)
            for lv in report["levels"]:
                print(f"level {lv['width']}x{lv['height']}: {lv['iterations']}/{lv['budget']} sweeps, "
                      f"residual {lv['residuals'][0]:.3g} -> {lv['residuals'][-1]:.3g}")
        elif args.command == "eval":
            sys.stdout.write(pipeline.cmd_eval(args.pred, args.gt))
        elif args.command == "synth":
            room = BoxRoom(tuple(args.half_extents), tuple(args.camera))
            pipeline.cmd_synth(args.out_dir, room, args.width, args.height, args.seed, _config(args),
                               args.identity, args.noise, args.down_factor, args.blur_radius,
                               args.views)
            print(f"wrote synthetic fixtures to {args.out_dir}")
    except PanoDepthError as exc:
        print(f"error: {exc.code}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
