"""Print the solved view of every partition of a grid."""
import argparse

from panodepth.geometry import solve_view_for_partition
from panodepth.partitions import grid_from_cuts, padded_pixel_rect


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--azimuth-cuts", default="0,72,144,216,288")
    ap.add_argument("--zenith-cuts", default="25,60,120,155")
    ap.add_argument("--width", type=int, default=2048)
    ap.add_argument("--height", type=int, default=1024)
    ap.add_argument("--rule", choices=("tight", "corner"), default="tight")
    ap.add_argument("--padded", action="store_true", help="solve for the padded pixel rectangles")
    args = ap.parse_args()
    grid = grid_from_cuts([float(t) for t in args.azimuth_cuts.split(",")],
                          [float(t) for t in args.zenith_cuts.split(",")])
    print(f"{'azimuth':>13} {'zenith':>11} {'center az':>9} {'zen':>7} {'fov x':>8} {'fov y':>8}")
    for p in grid:
        q = padded_pixel_rect(p, args.width, args.height).degrees(args.width, args.height) if args.padded else p
        v = solve_view_for_partition(q, fovx_rule=args.rule)
        print(f"{p.phi0:6g}-{p.phi1:<6g} {p.theta0:5g}-{p.theta1:<5g} {v.center.azimuth:9.3f} {v.center.zenith:7.3f} {v.fov_x:8.4f} {v.fov_y:8.4f}")


if __name__ == "__main__":
    main()
