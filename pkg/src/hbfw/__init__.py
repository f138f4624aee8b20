"""Frank-Wolfe with heavy-ball momentum and certified primal-dual gaps."""

from .exceptions import (
    BoundViolation,
    InvalidInputError,
    NumericFailure,
    ParseError,
    ReducedAccuracyWarning,
)
from .geometry import (
    L1Ball,
    L2Ball,
    NSupportBall,
    NuclearBall,
    lmo_bruteforce,
    lmo_l1,
    lmo_l2,
    lmo_nsupport,
    lmo_nuclear,
    make_region,
)
from .objectives import (
    LogisticProblem,
    MatrixCompletionProblem,
    QuadraticProblem,
    finite_difference_check,
)
from .restart import run_restart
from .solver import (
    ConstantDelta,
    DirectionalSmooth,
    JointDescent,
    LineSearch,
    MomentumState,
    OpenLoop2,
    Smooth,
    TraceRecord,
    Uniform,
    hfw_step,
    make_policy,
    run_fw,
    run_hfw,
    vanilla_gap,
)
from .estimators import FrankWolfeLogisticRegression, FrankWolfeMatrixCompletion

__version__ = "0.1.0"
