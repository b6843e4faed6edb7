"""Polynomial approximation on C^2 domains.

Charts and composite domains, Chebyshev-layer cell partitions, polynomial
partitions of unity, moduli of smoothness, discrete best approximation and
the numerical studies built on them.
"""
from .bestapprox import ApproxResult, alternation_count, best_approx, best_approx_sequence, write_csv
from .errors import (AboveGraphError, ChainingError, ChartSlopeError, C2ApproxError, DegreeBudgetError,
                     EmptyBallError, EmptyRegionError, EmptySlabError, ExponentOrderError,
                     GridTooCoarseWarning, IllConditionedWarning, NonConvergenceError,
                     ParameterTooSmallError, PointOutsideDomainError, RankDeficiencyError,
                     ResolutionError)
from .experiments import (ExperimentConfig, Table, Workspace, emit_report, run_bernstein_check,
                          run_inverse, run_jackson, run_tau_compare, run_whitney, test_suite)
from .geometry import (Chart, CompositeDomain, domain_from_json, domain_to_json, make_box, make_ellipse,
                       make_graph_domain, make_interval, make_unit_disk, metric_ball, phi_weight, rho_hat,
                       rho_omega)
from .mesh import CellPartition, build_partition, chebyshev_layers
from .polynomial import MultiPolynomial, Polynomial1D
from .sampling import SampleGrid, build_grid, lp_norm
from .smoothness import (ModulusReport, ModulusRequest, averaged_modulus_1d, directional_modulus,
                         dt_modulus, full_modulus, ivanov_tau, local_modulus, tangential_modulus)
from .unity import box_unity, chebyshev_unity_1d, fast_decreasing, global_unity, special_unity

__version__ = "0.1.0"

__all__ = [
    "ApproxResult", "alternation_count", "best_approx", "best_approx_sequence", "write_csv",
    "AboveGraphError", "ChainingError", "ChartSlopeError", "C2ApproxError", "DegreeBudgetError",
    "EmptyBallError", "EmptyRegionError", "EmptySlabError", "ExponentOrderError",
    "GridTooCoarseWarning", "IllConditionedWarning", "NonConvergenceError", "ParameterTooSmallError",
    "PointOutsideDomainError", "RankDeficiencyError", "ResolutionError",
    "ExperimentConfig", "Table", "Workspace", "emit_report", "run_bernstein_check", "run_inverse",
    "run_jackson", "run_tau_compare", "run_whitney", "test_suite",
    "Chart", "CompositeDomain", "domain_from_json", "domain_to_json", "make_box", "make_ellipse",
    "make_graph_domain", "make_interval", "make_unit_disk", "metric_ball", "phi_weight", "rho_hat",
    "rho_omega",
    "CellPartition", "build_partition", "chebyshev_layers",
    "MultiPolynomial", "Polynomial1D",
    "SampleGrid", "build_grid", "lp_norm",
    "ModulusReport", "ModulusRequest", "averaged_modulus_1d", "directional_modulus", "dt_modulus",
    "full_modulus", "ivanov_tau", "local_modulus", "tangential_modulus",
    "box_unity", "chebyshev_unity_1d", "fast_decreasing", "global_unity", "special_unity",
]
