"""Stitch perspective depth maps into an equirectangular depth panorama.

Each perspective view's depth is registered to a globally consistent
reference panorama with a per-partition cubic, then the registered pieces are
blended by matching their Laplacians.
"""
from .blending import BlendSchedule, assemble_targets, laplacian_field, multiscale_blend
from .geometry import PerspectiveView, SphericalDirection, solve_view_for_partition
from .grid import EquirectGrid
from .metrics import evaluate, median_scale
from .partitions import Partition, default_grid, grid_from_cuts
from .registration import RegistrationPoly, fit_poly

__version__ = "0.1.0"
