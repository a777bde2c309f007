"""restool: composite resilience indices and their spatio-temporal dynamics.

Turns a regions x years x indicators panel into composite scores, then
characterizes the score field with weighted standard-deviational ellipses,
(conditional) kernel density dynamics, and geographical-detector driver
analysis.
"""

__version__ = "0.1.0"

from .density import build_pairs, conditional_density, kde_1d, kde_2d, silverman_bandwidth
from .detector import (discretize_optimal, ecological_detector, factor_q, interaction,
                       risk_detector, significance)
from .ellipse import ellipse_trajectory, sd_ellipse, weighted_center
from .indexing import (aggregate_scores, attach_levels, classify_levels, entropy_weights,
                       load_weights, normalize_fixed_base, normalize_minmax)
from .panel import (build_knn_weights, build_spatial_weights, fill_missing, load_centroids,
                    load_panel, write_panel)

__all__ = [
    "__version__",
    "aggregate_scores", "attach_levels", "build_knn_weights", "build_pairs",
    "build_spatial_weights", "classify_levels", "conditional_density",
    "discretize_optimal", "ecological_detector", "ellipse_trajectory",
    "entropy_weights", "factor_q", "fill_missing", "interaction", "kde_1d",
    "kde_2d", "load_centroids", "load_panel", "load_weights",
    "normalize_fixed_base", "normalize_minmax", "risk_detector", "sd_ellipse",
    "significance", "silverman_bandwidth", "weighted_center", "write_panel",
]
