"""Clock processes of random hopping time dynamics on the REM landscape.

The package simulates the jump chain of RHT dynamics on the hypercube,
builds the rescaled clock process, estimates two-time range-avoidance
correlation functions, and checks them against the explicit limit
objects: stable subordinators, the random Levy measure of the extreme
scale, and the generalized arcsine law.
"""

__version__ = "0.1.0"

from .landscape import (
    Landscape,
    LandscapeParams,
    ScaleClass,
    ScaleSpec,
    classify_scale,
    derive_rn_from_epsilon,
    sample_landscape,
    solve_Bn,
)
from .gaussians import gaussian_tail, log_gaussian_tail
from .clock_dynamics import (
    ClockPath,
    CorrelationEstimate,
    estimate_correlation,
    gibbs_measure,
    range_avoids,
    simulate_clock,
    stationary_start_correlation,
)
from .clock_conditions import ConditionReport, check_conditions
from .limits import (
    PrmMarks,
    SubordinatorSpec,
    asl_cdf,
    c_sta,
    lepage_landscape,
    nu_ext,
    overshoot_correlation,
    sample_prm_marks,
    simulate_subordinator,
)
from .trap_model import TrapParams, compare_models, simulate_trap_clock

__all__ = [
    "Landscape",
    "LandscapeParams",
    "ScaleClass",
    "ScaleSpec",
    "classify_scale",
    "derive_rn_from_epsilon",
    "sample_landscape",
    "solve_Bn",
    "gaussian_tail",
    "log_gaussian_tail",
    "ClockPath",
    "CorrelationEstimate",
    "estimate_correlation",
    "gibbs_measure",
    "range_avoids",
    "simulate_clock",
    "stationary_start_correlation",
    "ConditionReport",
    "check_conditions",
    "PrmMarks",
    "SubordinatorSpec",
    "asl_cdf",
    "c_sta",
    "lepage_landscape",
    "nu_ext",
    "overshoot_correlation",
    "sample_prm_marks",
    "simulate_subordinator",
    "TrapParams",
    "compare_models",
    "simulate_trap_clock",
]
