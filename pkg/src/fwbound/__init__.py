"""Worst-case Frank-Wolfe trajectories and lower-bound certificates
for quadratic minimization over strongly convex sets."""

from .dynamics import (
    DomainError,
    DomainTag,
    PolarState,
    RSState,
    Termination,
    backward_G,
    check_jump_precondition,
    forward_F,
    ls_gamma,
    ls_polar_step,
    monotone_condition,
    polar_step,
    reconstruct_theta,
    sbar,
    threshold_g,
)
from .fwcore import (
    BallInstance,
    EllipsoidInstance,
    Trajectory,
    embed_polar,
    lmo_ball,
    map_to_ball,
    run_fw,
    short_step_gamma,
    to_polar,
    verify_affine_equivalence,
)
from .numeric import (
    HARDWARE,
    Mode,
    PrecisionConfig,
    PrecisionError,
    ScalarContext,
    extended,
    make_context,
)
from .search import SearchResult, bisection_search, grid_search, stable_phase_length
from .worstcase import (
    ConstructionParams,
    ConstructionResult,
    LowerBoundCertificate,
    alg1_construct,
    certify,
    choose_epsilon,
    construct_and_certify,
    forward_replay,
)

__version__ = "0.1.0"
