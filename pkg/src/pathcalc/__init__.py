"""Pathwise quadratic variation, Riemann integrals and functional change of variable.

Paths are cadlag with finitely many breakpoints (:class:`CadlagPath`),
partitions are refining sequences (:class:`PartitionSequence`) and causal
functionals live in :mod:`pathcalc.functional`.
"""

from .functional import (
    Functional,
    ambient,
    builtin,
    horizontal_derivative,
    parse_functional_spec,
    pi_continuity_report,
    strict_causality_probe,
    vertical_derivative,
    vertical_hessian,
)
from .identities import (
    bracket,
    demo_compare_iii,
    demo_prop11,
    demo_U_discontinuity,
    fair_game_probe,
    harmonic_check,
    kw_check,
    one_form_identity_check,
)
from .integrate import (
    PathwiseIntegral,
    cov_C12,
    cov_class_S,
    jump_compensation_series,
    pathwise_integral,
    riemann_sum,
    time_integral,
)
from .partition import Partition, PartitionSequence, dyadic_sequence, parse_partition_spec, uniform_sequence
from .path import (
    CadlagPath,
    faber_schauder_path,
    parse_path_spec,
    pc_approx,
    pl_approx,
    skorokhod_distance,
    step_path,
    sup_distance,
)
from .quadvar import QuadraticVariation, qv_estimate, qv_matrix, stieltjes_integral, weighted_quad_sum

__version__ = "0.1.0"

__all__ = [
    "CadlagPath",
    "Partition",
    "PartitionSequence",
    "dyadic_sequence",
    "uniform_sequence",
    "parse_partition_spec",
    "parse_path_spec",
    "step_path",
    "faber_schauder_path",
    "pc_approx",
    "pl_approx",
    "sup_distance",
    "skorokhod_distance",
    "qv_estimate",
    "qv_matrix",
    "stieltjes_integral",
    "weighted_quad_sum",
    "QuadraticVariation",
    "Functional",
    "ambient",
    "builtin",
    "parse_functional_spec",
    "horizontal_derivative",
    "vertical_derivative",
    "vertical_hessian",
    "strict_causality_probe",
    "pi_continuity_report",
    "riemann_sum",
    "pathwise_integral",
    "time_integral",
    "cov_C12",
    "cov_class_S",
    "jump_compensation_series",
    "PathwiseIntegral",
    "bracket",
    "kw_check",
    "one_form_identity_check",
    "harmonic_check",
    "fair_game_probe",
    "demo_prop11",
    "demo_U_discontinuity",
    "demo_compare_iii",
]
