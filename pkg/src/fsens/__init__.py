"""f-divergence global sensitivity analysis.

Subpackages are imported lazily by the user; the most common entry points are
re-exported here.
"""

__version__ = "0.1.0"

from .divergences import get as divergence  # noqa: E402
from .estimators import (  # noqa: E402
    KdeConfig,
    SampleSet,
    draw_samples,
    estimate_kde_mc,
    estimate_mc,
    estimate_pdd_kde_mc,
    scale_index,
)
from .functions import builtin  # noqa: E402
from .pdd import compute_coefficients, sobol_from_pdd  # noqa: E402

__all__ = [
    "__version__", "divergence", "KdeConfig", "SampleSet", "draw_samples", "estimate_mc",
    "estimate_kde_mc", "estimate_pdd_kde_mc", "scale_index", "builtin",
    "compute_coefficients", "sobol_from_pdd",
]
