"""Community detection with an L0-penalized graph Laplacian."""

from .estimator import L0LapCommunityDetector
from .extractor import (
    Community,
    DetectionConfig,
    DetectionResult,
    binom_tail,
    detect,
    extract_all,
    permutation_filter,
    tune_eta,
)
from .graph import (
    EdgeListParseError,
    Graph,
    GraphError,
    UndefinedCriterionError,
    from_edge_list,
    laplacian_apply,
    membership_vector,
    phi,
    psi,
    read_edge_list,
    set_stats,
    write_edge_list,
)
from .metrics import (
    UndefinedMetricError,
    benchmark_summary,
    jaccard_error,
    nmi,
    overlap_matrix,
)
from .models import (
    DcsbmParams,
    InfeasibleParametersError,
    ThetaDist,
    build_connection_matrix,
    fixed_size_sample,
    sample,
    simulation_network,
)
from .solver import (
    DegenerateInputError,
    SolverConfig,
    SolverOutcome,
    hard_threshold,
    l0lap_iterate,
    two_phase_solve,
)

__version__ = "0.1.0"

__all__ = [
    "Community", "DcsbmParams", "DegenerateInputError", "DetectionConfig",
    "DetectionResult", "EdgeListParseError", "Graph", "GraphError",
    "InfeasibleParametersError", "L0LapCommunityDetector", "SolverConfig",
    "SolverOutcome", "ThetaDist", "UndefinedCriterionError", "UndefinedMetricError",
    "benchmark_summary", "binom_tail", "build_connection_matrix", "detect",
    "extract_all", "fixed_size_sample", "from_edge_list", "hard_threshold",
    "jaccard_error", "l0lap_iterate", "laplacian_apply", "membership_vector", "nmi",
    "overlap_matrix", "permutation_filter", "phi", "psi", "read_edge_list", "sample",
    "set_stats", "simulation_network", "tune_eta", "two_phase_solve", "write_edge_list",
]
