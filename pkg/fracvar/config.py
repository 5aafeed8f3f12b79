import os
from typing import Dict

# Environment variables
FRACVAR_THREADS = os.getenv("FRACVAR_THREADS", "1")
FRACVAR_LOG_LEVEL = os.getenv("FRACVAR_LOG_LEVEL", "INFO")


# Mittag-Leffler and quadrature accuracy
class Tolerances:
    ML_SERIES = 1e-12
    ML_MAX_TERMS = 10_000
    ML_FALLBACK_ABS_Z = 50.0
    ML_ASYMPTOTIC_TERMS = 400
    SPECTRAL_QUAD = 1e-10
    SPECTRAL_MAX_DEPTH = 40
    GL_POINTS = 15
    SINGULAR_ORDER = 1e-12
    QUAD_BUDGET = 0.1
    WARP_FD_STEP = 1e-4
    WARP_FD_TOL = 1e-5


# Grid sizes and sampling
class GridLimits:
    MIN_NODES = 8
    MIN_DERIV_NODES = 16
    ORDER_SAMPLES = 1024
    NORM_SAMPLES = 257


# Nonlinear solver for the Caputo-type equation
class SolverConfig:
    TOL = 1e-10
    NEWTON_MAX_ITER = 50
    BISECTION_MAX_EXPAND = 60
    BISECTION_MAX_ITER = 200
    BOUND_SLACK = 1e-7
    DU_STEP = 1e-7
    COMPATIBILITY_MODES = ("relax", "strict")


# Verification suites
class SuiteDefaults:
    N = 512
    LIMIT_N = 2048
    SEED = 2024
    SEQ_LEN = 16
    RANDOM_TRIG = 20
    TRIG_DEGREE = 6
    LIPSCHITZ_PAIRS = 50
    EPSILONS = (1e-2, 1e-4, 1e-6)
    UPPER_EPSILONS = (1e-1, 1e-2, 1e-3)
    MIN_EPSILON = 1e-8
    VANISH_GRIDS = (256, 512, 1024)
    NAMES = (
        "boundedness",
        "lipschitz",
        "limit_interchange",
        "axiom_limits",
        "max_point",
        "vanish_at_a",
    )


TOL_MAP: Dict[str, float] = {
    "boundedness": 1e-9,
    "lipschitz": 0.05,
    "limit_interchange": 1e-9,
    "limit_interchange_abs": 1e-12,
    "operator_limit": 1e-3,
    "max_point": 1e-6,
    "vanish_at_a": 1.5,
    "cauchy_schwarz": 1e-9,
}


# Process exit codes of the command line front end
class ExitCodes:
    OK = 0
    VALIDATION = 1
    NUMERICAL = 2
    SUITE_FAILURE = 3


# Output column names
class OutputFields:
    T = "t"
    VALUE = "value"
    ERROR = "estimate_error"
    FLOAT_FORMAT = "%.17g"


SPECIAL_CASES = (
    "variable_ml",
    "atangana",
    "yang_machado",
    "caputo_fabrizio",
    "unit_norm_exp",
    "log_warp",
    "sin_warp",
)

OPERATORS = (
    "rl_ns",
    "caputo_ns",
    "rl_classical",
    "caputo_classical",
    "rl_integral",
)

INTEGRALS = ("rl_integral", "aux_1", "aux_2")

SCHEMES = ("product_trapezoid", "product_midpoint")
