"""Streaming kernel smoothers with per-observation shrinking bandwidths."""

from .additive import SequentialBackfitter
from .bandwidth import BandwidthSchedule, bandwidth_at, validate_power_schedule
from .batch import BatchFitConfig, batch_locpoly_fit, loo_cv_constant
from .density import SequentialKDE, kde_leading_risk
from .errors import (
    ConvergenceWarning,
    EmptyEstimatorError,
    KernelConstructionError,
    LowMassError,
    OutOfGridError,
    QualityWarning,
    SelectionError,
)
from .grid import EvaluationGrid
from .kernels import (
    EPANECHNIKOV,
    GAUSSIAN,
    KernelSpec,
    eval_kernel,
    get_kernel,
    kernel_moment,
    make_higher_order_kernel,
    scaled_kernel_weight,
)
from .locpoly import GridPointState, SequentialLocPoly, SequentialNW, rank_one_inverse_update
from .mixing import ExpertPool, build_expert_pool, weights_from_losses

__version__ = "0.1.0"
