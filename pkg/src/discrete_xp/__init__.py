"""Numerical toolkit for Walsh analysis on the cube, smoothing on discrete tori,
X_p-type inequality evaluation, extremal ratio search and embedding-distortion formulas."""

__version__ = "0.1.0"

from .walsh import CubeFunction, Multiplier, WalshSpectrum, walsh_transform, inverse_walsh_transform  # noqa: E402
from .torus import TorusFunction, difference_stats, smoothed_difference_stats  # noqa: E402
from .inequalities import InequalityReport  # noqa: E402
from .search import SearchConfig, SearchResult, constant_sweep, maximize_chaos_ratio, maximize_linear_ratio  # noqa: E402

__all__ = [
    "CubeFunction",
    "InequalityReport",
    "Multiplier",
    "SearchConfig",
    "SearchResult",
    "TorusFunction",
    "WalshSpectrum",
    "constant_sweep",
    "difference_stats",
    "inverse_walsh_transform",
    "maximize_chaos_ratio",
    "maximize_linear_ratio",
    "smoothed_difference_stats",
    "walsh_transform",
]
