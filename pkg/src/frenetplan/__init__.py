"""Frenet-frame trajectory generation with terminal-state regulation,
momentum-aware refinement, and a deterministic replanning simulator."""

__version__ = "0.1.0"

from .endpoint_regulation import (
    RegulationConfig,
    enforce_spacing,
    regulated_cluster,
    regulation_energy,
    select_reference_candidate,
)
from .evaluation import (
    ClusterStats,
    Constraint,
    FeasibilityReport,
    JerkStats,
    KinematicLimits,
    check_candidate,
    feasibility_breakdown,
    jerk_statistics,
    nn_distance_stats,
)
from .frenet_geometry import (
    FrenetState,
    ReferencePath,
    build_reference_path,
    cartesian_to_frenet,
    curvature_at,
    frenet_to_cartesian,
)
from .momentum_optimizer import (
    AssistiveParams,
    InteractionParams,
    KinematicModel,
    Neighbor,
    OptimizerConfig,
    PlanningContext,
    assistive_force,
    cost_gradient,
    interaction_force,
    lagrangian_at,
    optimize_trajectory,
    total_cost,
)
from .quintic_sampling import (
    QuinticCoeffs,
    SamplingGrid,
    TrajectoryCandidate,
    TrajectoryCluster,
    eval_quintic,
    generate_cluster,
    solve_quintic,
)
from .replanning_sim import (
    ModeSwitches,
    Scenario,
    SimLog,
    SimSettings,
    run,
    select_candidate,
    validate_scenario_dict,
)
