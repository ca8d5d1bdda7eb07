"""Differentially private non-smooth convex optimization.

Subquadratic-gradient-complexity ERM and SCO solvers built from ball-
convolution smoothing, an accelerated stochastic approximation core, and a
truncated-CDP accountant for the subsampled Gaussian mechanism.
"""

from .accountant import (
    DEFAULT_CONSTANTS,
    AccountantConstants,
    ApproxDpBudget,
    TcdpBudget,
    amplify_subsample,
    calibrate_sigma,
    compose,
    compose_many,
    gaussian_tcdp,
    spent_budget,
    tcdp_to_approx_dp,
)
from .acsa import AcsaState, acsa_md_point, acsa_prox_step, acsa_run
from .baseline import dpsgd_baseline, dpsgd_chains
from .errors import (
    CalibrationError,
    InvalidInputError,
    NoPrivacyError,
    PreconditionError,
    SolverError,
    TruncationError,
)
from .harness import (
    ExperimentConfig,
    TrialResult,
    exact_erm_oracle,
    fit_loglog_slope,
    run_experiment,
)
from .localization import (
    LocalizationSchedule,
    localize,
    make_schedule,
    phase_erm_schedule,
    sco_strongly,
)
from .private_erm import (
    ErmResult,
    PrivateAcsaConfig,
    doubling_reduction,
    erm_general,
    erm_strongly,
    erm_strongly_schedule,
    private_acsa,
)
from .problem import (
    BallDomain,
    BallIntersectionDomain,
    BoxDomain,
    Dataset,
    Domain,
    HingeLoss,
    LossFamily,
    QuadraticDistanceLoss,
    QuadraticOffset,
    hinge_loss_subgrad,
    regularize,
)
from .sampling import (
    RandomStream,
    gaussian_vector,
    subsample_without_replacement,
    uniform_ball_point,
)
from .smoothing import (
    OracleStreams,
    SmoothedOracle,
    SmoothedOracleConfig,
    mc_smoothed_grad,
    mc_smoothed_value,
    smoothed_stochastic_subgrad,
)
from .tasks import Task, make_hinge_task, make_quadratic_task, make_task

__version__ = "0.1.0"
