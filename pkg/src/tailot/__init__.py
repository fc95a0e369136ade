"""Exact quadratic optimal transport for discrete measures, convex-potential
diagnostics, and tail-rescaling studies for regularly varying laws."""

from .convex import (
    MultiMapGraph,
    NotCyclicallyMonotoneError,
    PolyhedralPotential,
    graphical_convergence_diagnostic,
    hausdorff_distance,
    image_of_set,
    inclusion_check,
    potential_from_duals,
    rockafellar_potential,
    scale_graph,
    scale_potential,
    subdiff_eval,
)
from .measures import (
    DiscreteMeasure,
    TailScaling,
    TestFunctional,
    empirical_quantile_b,
    m0_distance,
    make_discrete,
    rescale_measure,
    restrict_outside_ball,
    sample_regularly_varying,
)
from .tails import (
    TailStudyConfig,
    TailStudyResult,
    coupling_homogeneity_residual,
    estimate_exponent,
    map_homogeneity_residual,
    monotone_map_1d,
    potential_homogeneity_residual,
    rescale_coupling,
    run_tail_study,
    truncate_to_annulus,
)
from .transport import (
    Coupling,
    CycleViolation,
    brute_force_assignment,
    dual_potentials,
    solve_exact,
    transport_cost,
    verify_cyclic_monotonicity,
)

__version__ = "0.1.0"
