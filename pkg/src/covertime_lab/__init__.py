"""Monte Carlo laboratory for random-walk cover times and thick points.

Simulates simple random walks on balanced b-ary trees, lattice tori, and the
unbounded planar lattice; verifies the associated cover-time and thick-point
limit laws empirically; and exposes the proof machinery (return counts, the
Wald identity, excursion counts, special vertices, embedded branching
processes) as testable computations backed by exact small-instance oracles.
"""

from .branching import (
    BinomialTailQuery,
    OffspringLaw,
    SupercriticalCertificate,
    binomial_tail_below,
    certify_supercritical,
    extinction_probability,
    gaussian_tail,
    proof_tail_query,
    simulate_gw_survival,
)
from .errors import CapacityError, StepCapExceeded, UsageError
from .excursions import (
    ExcursionSpec,
    SpecialClassification,
    SpecialVertexConfig,
    SymmetryCheck,
    classify_special,
    count_excursions,
    excursion_symmetry_check,
)
from .graphs import (
    DiscSpec,
    TorusTopology,
    TreeTopology,
    commute_time_bound,
    exact_cover_time,
    exact_hit_before,
    exact_hit_before_return,
    exact_hitting_time,
    exact_hitting_times_to,
    tree_neighbors,
)
from .stats import (
    BoundCheck,
    EstimatorSummary,
    TrendSeries,
    TrendVerdict,
    bound_check,
    summarize,
    trend_check,
)
from .walker import (
    Lattice2D,
    TreeCoverRecord,
    VisitField,
    WalkConfig,
    run_eps_cover_proxy,
    run_thick_points,
    run_torus_cover,
    run_tree_cover,
    torus_first_visits,
)

__version__ = "0.1.0"

__all__ = [
    "BinomialTailQuery",
    "BoundCheck",
    "CapacityError",
    "DiscSpec",
    "EstimatorSummary",
    "ExcursionSpec",
    "Lattice2D",
    "OffspringLaw",
    "SpecialClassification",
    "SpecialVertexConfig",
    "StepCapExceeded",
    "SupercriticalCertificate",
    "SymmetryCheck",
    "TorusTopology",
    "TreeCoverRecord",
    "TreeTopology",
    "TrendSeries",
    "TrendVerdict",
    "UsageError",
    "VisitField",
    "WalkConfig",
    "binomial_tail_below",
    "bound_check",
    "certify_supercritical",
    "classify_special",
    "commute_time_bound",
    "count_excursions",
    "exact_cover_time",
    "exact_hit_before",
    "exact_hit_before_return",
    "exact_hitting_time",
    "exact_hitting_times_to",
    "excursion_symmetry_check",
    "extinction_probability",
    "gaussian_tail",
    "proof_tail_query",
    "run_eps_cover_proxy",
    "run_thick_points",
    "run_torus_cover",
    "run_tree_cover",
    "simulate_gw_survival",
    "summarize",
    "torus_first_visits",
    "tree_neighbors",
    "trend_check",
]
