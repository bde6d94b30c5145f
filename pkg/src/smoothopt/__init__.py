"""smoothopt: gradient-free optimization as zeroth-order descent on
Gaussian-smoothed objectives, with a landscape laboratory for the
coverage-optimality tradeoff and the estimator moment scalings."""

from .core import (
    ConfigurationError,
    ContractViolationError,
    EstimationError,
    Objective,
    RngStream,
    sample_gaussian,
    softmax_weights,
)
from .objectives import (
    CANONICAL_CHECKER_2D,
    CANONICAL_GMM_1D,
    CheckerboardSpec,
    GmmSpec,
    make_blackbox,
    make_checkerboard,
    make_gmm_potential,
    make_objective,
    make_pendulum_swingup,
)
from .optimizers import (
    ALGORITHMS,
    RunRecord,
    SboConfig,
    Schedule,
    run_cem,
    run_cmaes,
    run_dida,
    run_mbd,
    run_mppi,
    run_sa,
    sbo_step,
)
from .smoothing import (
    GmmSmoothOracle,
    SmoothedEval,
    SmoothingParams,
    estimate_smoothed,
    estimate_smoothed_hessian,
    gmm_smoothed_exact,
)

__version__ = "0.1.0"
