"""Coordination of connected automated vehicles through a signal-free intersection.

Two-level scheme: an upper-level planner assigns each arriving vehicle a lane
and the minimum feasible control-zone exit time against the shared crossing
protocol, and a closed-form low-level solver turns that exit time into the
energy-optimal trajectory the vehicle then follows exactly.
"""

from .geometry import (
    ALL_MOVEMENTS,
    Cardinal,
    IntersectionLayout,
    LaneId,
    MergingWindow,
    Movement,
    TurnKind,
    conflicts,
    sample_zone_path,
)
from .planner import (
    BindingConstraint,
    LaneCandidate,
    PlanRequest,
    PlanResult,
    PlanningError,
    feasible_tf,
    fifo_plan,
    lateral_ok,
    lateral_separation,
    min_feasible_tf,
    plan,
    plan_with_diagnostics,
    rear_end_margin,
    rear_end_ok,
)
from .protocol import (
    CrossingProtocol,
    DuplicateVehicleError,
    LaneFunction,
    LanePiece,
    Occupancy,
    ProtocolEntry,
)
from .scenario import (
    ScenarioError,
    generate_random_scenario,
    load_scenario,
    parse_scenario_dict,
    save_scenario,
    scenario_to_dict,
)
from .simulation import (
    Arrival,
    MetricsReport,
    Policy,
    RunResult,
    Scenario,
    SimulationError,
    VehiclePhase,
    VehicleState,
    Violation,
    compare_policies,
    integrate_dynamics,
    monitor,
    run,
    snapshot,
)
from .trajectory import (
    CubicTrajectory,
    FeasibilityReport,
    InvalidHorizonError,
    InverseFit,
    NonMonotoneError,
    OutOfDomainError,
    TrajectorySample,
    VehicleParams,
    solve_boundary,
)

__version__ = "0.1.0"
