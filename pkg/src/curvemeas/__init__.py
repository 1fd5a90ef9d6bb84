"""Measures on embedded graphs: exact optimal transport, a reciprocal-
density length functional, and solvers for the transport-plus-length
variational problem."""

__version__ = "0.1.0"

from .errors import (
    CurvemeasError,
    DegenerateRadiusError,
    InfeasibleError,
    InputFormatError,
)
from .graph import (
    EmbeddedGraph,
    ball_length,
    graph_to_svg,
    hausdorff_distance,
    load_graph,
    minimum_spanning_tree,
    project,
    project_many,
    sample_arclength,
    save_graph,
    sphere_crossings,
    total_length,
)
from .length import (
    CurveMeasure,
    apply_affine,
    approximate_uniform,
    ball_ratio_estimate,
    discretize_curve_measure,
    length_of,
    length_parametric,
    load_curve_measure,
    save_curve_measure,
)
from .measures import (
    DiscreteMeasure,
    convex_hull_margin,
    load_measure,
    p_mean,
    p_moment_cost,
    project_to_hull,
    sample_density,
    save_measure,
)
from .solver import (
    AlphaResult,
    SolveResult,
    SolverConfig,
    energy,
    lambda_star_bounds,
    move_vertices,
    optimize_alpha,
    optimize_densities,
    solve,
    sweep_lambda,
)
from .transport import (
    TransportPlan,
    geodesic_interpolate,
    restrict_plan,
    save_plan_csv,
    solve_ot,
    solve_ot_lower_bounded,
)
from .validation import (
    TwoDiracSolution,
    ahlfors_profile,
    check_excess_projection,
    check_plan_decomposition,
    two_dirac_solution,
)

__all__ = [
    "__version__",
    "CurvemeasError",
    "DegenerateRadiusError",
    "InfeasibleError",
    "InputFormatError",
    "EmbeddedGraph",
    "ball_length",
    "graph_to_svg",
    "hausdorff_distance",
    "load_graph",
    "minimum_spanning_tree",
    "project",
    "project_many",
    "sample_arclength",
    "save_graph",
    "sphere_crossings",
    "total_length",
    "CurveMeasure",
    "apply_affine",
    "approximate_uniform",
    "ball_ratio_estimate",
    "discretize_curve_measure",
    "length_of",
    "length_parametric",
    "load_curve_measure",
    "save_curve_measure",
    "DiscreteMeasure",
    "convex_hull_margin",
    "load_measure",
    "p_mean",
    "p_moment_cost",
    "project_to_hull",
    "sample_density",
    "save_measure",
    "AlphaResult",
    "SolveResult",
    "SolverConfig",
    "energy",
    "lambda_star_bounds",
    "move_vertices",
    "optimize_alpha",
    "optimize_densities",
    "solve",
    "sweep_lambda",
    "TransportPlan",
    "geodesic_interpolate",
    "restrict_plan",
    "save_plan_csv",
    "solve_ot",
    "solve_ot_lower_bounded",
    "TwoDiracSolution",
    "ahlfors_profile",
    "check_excess_projection",
    "check_plan_decomposition",
    "two_dirac_solution",
]
