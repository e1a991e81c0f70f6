"""Counting (x, y), (x + d, y), (x, y + d^2) in dense subsets of a grid.

Fejer-weighted counting operators, Gowers sums, Weyl sums with major-arc
certificates, dual functions, the energy increment, and popular differences.
"""

from .counting import (CountingParams, CountProfile, configuration_sum, count_for_difference,
                       count_profile, dual_F, dual_G, lambda_, lambda_indicator, weighted_count)
from .energy import IncrementConfig, IncrementTrace, energy, energy_increment_run
from .expsums import MajorArcCertificate, rationalize, torus_norm, weyl_sum
from .gowers import gowers_norm, gowers_sum
from .grid import DenseFunction, Fiber, GridWindow, SetIndicator, density, indicator_from_points
from .kernels import Kernel, convolve, fejer, stretched_fejer
from .popular import popular_difference_search, verify_2d_threshold

__version__ = "0.1.0"
