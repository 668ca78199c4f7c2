"""Upper-level planning: pick a lane and the minimum feasible exit time.

For an arriving vehicle the planner searches, per admissible lane, for the
smallest exit time whose induced boundary trajectory (a) keeps speed and
acceleration inside slightly tightened bounds, so the executed plan never
rides a hard limit, (b) keeps the scaled gap to the lane predecessor at or
above the speed-dependent safe distance at every instant, and (c) occupies
the merging zone disjointly in time from every conflicting registered
vehicle.  The search combines a closed-form bounds-only lower bracket, a
fixed-resolution forward scan whose lateral rejections jump straight past
the blocking occupancy, and a final bisection onto the feasibility boundary.

A first-in-first-out variant adds the constraint that the vehicle may not
enter the merging zone before any earlier-registered vehicle does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .geometry import IntersectionLayout, LaneId, Movement, conflicts
from .protocol import CrossingProtocol, Occupancy, ProtocolEntry, LaneFunction
from .trajectory import CubicTrajectory, VehicleParams, solve_boundary

# Margin by which planned extrema stay inside the hard bounds, and the
# minimum slack demanded from the safety constraints.  The bound margin keeps
# "no constraint becomes active" true of executed plans; the safety slack
# protects sampled monitoring from float-level sign flips at the optimum.
BOUND_MARGIN = 1e-6
SAFETY_SLACK = 1e-9

DEFAULT_HORIZON_CAP = 120.0
DEFAULT_RESOLUTION = 1e-3


class PlanningError(RuntimeError):
    """No feasible exit time exists on any admissible lane."""

    def __init__(self, vehicle_id: str, lane_failures: dict[LaneId, "BindingConstraint"]):
        self.vehicle_id = vehicle_id
        self.lane_failures = lane_failures
        detail = ", ".join(
            f"lane {lane}: blocked by {kind.value}" for lane, kind in lane_failures.items()
        )
        super().__init__(f"no feasible plan for vehicle {vehicle_id!r} ({detail})")


class BindingConstraint(str, Enum):
    # NONE marks a FIFO plan pinned by entry order rather than by physics.
    NONE = "none"
    BOUNDS = "bounds"
    REAR_END = "rear_end"
    LATERAL = "lateral"


class _Fail(Enum):
    BOUNDS = "bounds"
    ORDER = "order"
    REAR_END = "rear_end"
    LATERAL = "lateral"


_FAIL_TO_BINDING = {
    _Fail.BOUNDS: BindingConstraint.BOUNDS,
    _Fail.ORDER: BindingConstraint.NONE,
    _Fail.REAR_END: BindingConstraint.REAR_END,
    _Fail.LATERAL: BindingConstraint.LATERAL,
}


@dataclass(frozen=True)
class PlanRequest:
    vehicle_id: str
    movement: Movement
    t0: float
    v0: float
    params: VehicleParams

    def __post_init__(self) -> None:
        if not self.params.v_min <= self.v0 <= self.params.v_max:
            raise ValueError(
                f"arrival speed {self.v0} outside "
                f"[{self.params.v_min}, {self.params.v_max}]"
            )


@dataclass(frozen=True)
class PlanResult:
    lane: LaneId
    tf: float
    trajectory: CubicTrajectory
    lane_function: LaneFunction
    binding_constraint: BindingConstraint


@dataclass(frozen=True)
class LaneCandidate:
    """Per-lane search outcome, for the plan debug dump."""

    lane: LaneId
    tf: Optional[float]
    trajectory: Optional[CubicTrajectory]
    binding_constraint: BindingConstraint
    blocked_intervals: tuple[tuple[float, float], ...]


# ---------------------------------------------------------------------------
# Safety predicates
# ---------------------------------------------------------------------------

def _shift_cubic(coeffs: tuple[float, float, float, float], origin: float):
    """Re-center an absolute-time cubic at `origin` (Taylor coefficients)."""
    a3, a2, a1, a0 = coeffs
    b0 = ((a3 * origin + a2) * origin + a1) * origin + a0
    b1 = (3.0 * a3 * origin + 2.0 * a2) * origin + a1
    b2 = 3.0 * a3 * origin + a2
    return (a3, b2, b1, b0)


def rear_end_margin(
    candidate: CubicTrajectory, leader: ProtocolEntry, params: VehicleParams
) -> float:
    """Worst value of scaled_gap - safe_distance over the shared time window.

    The gap term and the follower speed are both polynomials, so the margin
    g(t) is a cubic whose minimum over the closed overlap lies at an endpoint
    or at a root of its quadratic derivative.  Returns +inf when the two
    windows do not overlap.
    """
    lo = max(candidate.t0, leader.t0)
    hi = min(candidate.tf, leader.tf)
    if hi < lo:
        return math.inf
    xi = params.reaction_gain
    rho = params.headway
    pk = leader.trajectory.absolute_coefficients()
    pi = candidate.absolute_coefficients()
    # The follower speed polynomial is 3*a3*t^2 + 2*a2*t + a1.
    g3 = xi * (pk[0] - pi[0])
    g2 = xi * (pk[1] - pi[1]) - rho * 3.0 * pi[0]
    g1 = xi * (pk[2] - pi[2]) - rho * 2.0 * pi[1]
    g0 = xi * (pk[3] - pi[3]) - rho * pi[2] - params.standstill_gap
    # Re-center on the overlap start to limit cancellation at large t.
    g3, g2, g1, g0 = _shift_cubic((g3, g2, g1, g0), lo)
    span = hi - lo

    def g(s: float) -> float:
        return ((g3 * s + g2) * s + g1) * s + g0

    values = [g(0.0), g(span)]
    # Stationary points of the cubic: roots of 3*g3*s^2 + 2*g2*s + g1.
    qa, qb, qc = 3.0 * g3, 2.0 * g2, g1
    if abs(qa) > 0.0:
        disc = qb * qb - 4.0 * qa * qc
        if disc >= 0.0:
            sq = math.sqrt(disc)
            for root in ((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)):
                if 0.0 < root < span:
                    values.append(g(root))
    elif abs(qb) > 0.0:
        root = -qc / qb
        if 0.0 < root < span:
            values.append(g(root))
    return min(values)


def rear_end_ok(
    candidate: CubicTrajectory, leader: ProtocolEntry, params: VehicleParams
) -> bool:
    """Whether the candidate keeps a safe distance behind the leader."""
    return rear_end_margin(candidate, leader, params) >= 0.0


def lateral_ok(
    candidate_occupancy: tuple[float, float] | Occupancy,
    other_occupancy: tuple[float, float] | Occupancy,
    buffer: float = 0.0,
) -> bool:
    """Whether two merging-zone occupancy intervals are disjoint.

    The candidate's interval is inflated by `buffer` on both sides before
    the check, so raising the buffer shrinks the admissible schedule by
    twice its value per conflicting pair.
    """
    c_in, c_out = candidate_occupancy
    o_in, o_out = other_occupancy
    return c_out + buffer < o_in or c_in - buffer > o_out


def lateral_separation(
    occupancy_a: tuple[float, float] | Occupancy,
    occupancy_b: tuple[float, float] | Occupancy,
) -> float:
    """Signed time gap between two occupancy intervals (negative = overlap)."""
    a_in, a_out = occupancy_a
    b_in, b_out = occupancy_b
    return max(b_in - a_out, a_in - b_out)


# ---------------------------------------------------------------------------
# Minimum-exit-time search
# ---------------------------------------------------------------------------

def _tightened_params(params: VehicleParams, v0: float) -> VehicleParams:
    """Bounds pulled in by the planning margin.

    The given arrival speed is exempt: a vehicle arriving exactly at a speed
    limit would otherwise be unplannable, since no exit time changes v(t0).
    """
    return VehicleParams(
        u_min=params.u_min + BOUND_MARGIN,
        u_max=params.u_max - BOUND_MARGIN,
        v_min=min(params.v_min + BOUND_MARGIN, v0),
        v_max=max(params.v_max - BOUND_MARGIN, v0),
        headway=params.headway,
        standstill_gap=params.standstill_gap,
        reaction_gain=params.reaction_gain,
    )


def _bounds_lower_bracket(v0: float, s_total: float, caps: VehicleParams) -> float:
    """Smallest horizon not violating the speed cap or the acceleration cap.

    Below s_total/v0 the vehicle accelerates the whole way, so the speed
    maximum is the terminal speed (3*s - v0*T)/(2*T) and the acceleration
    maximum is the initial one 3*(s - v0*T)/T^2; both relax as T grows.
    """
    t_speed = 3.0 * s_total / (v0 + 2.0 * caps.v_max)
    disc = 9.0 * v0 * v0 + 12.0 * caps.u_max * s_total
    t_accel = (math.sqrt(disc) - 3.0 * v0) / (2.0 * caps.u_max)
    return max(t_speed, t_accel)


@dataclass
class _SearchContext:
    request: PlanRequest
    lane: LaneId
    s_total: float
    window_entry: float
    window_exit: float
    caps: VehicleParams
    leader: Optional[ProtocolEntry]
    conflicting: list[Occupancy]
    lateral_buffer: float
    min_zone_entry: Optional[float]

    def check(self, tf: float) -> tuple[bool, Optional[_Fail], Optional[float]]:
        """Full feasibility of one candidate exit time.

        Returns (ok, failed-constraint, zone-entry target to jump past).
        """
        req = self.request
        traj = solve_boundary(req.v0, self.s_total, req.t0, tf)
        if not traj.feasibility(self.caps).ok:
            return False, _Fail.BOUNDS, None
        t_in = traj.invert(self.window_entry)
        if self.min_zone_entry is not None and t_in < self.min_zone_entry - SAFETY_SLACK:
            return False, _Fail.ORDER, self.min_zone_entry
        if self.leader is not None:
            if rear_end_margin(traj, self.leader, req.params) < SAFETY_SLACK:
                return False, _Fail.REAR_END, None
        t_out = traj.invert(self.window_exit)
        for occ in self.conflicting:
            separated = (
                t_out + self.lateral_buffer < occ.t_in - SAFETY_SLACK
                or t_in - self.lateral_buffer > occ.t_out + SAFETY_SLACK
            )
            if not separated:
                return False, _Fail.LATERAL, occ.t_out + self.lateral_buffer + 2.0 * SAFETY_SLACK
        return True, None, None

    def zone_entry(self, tf: float) -> float:
        traj = solve_boundary(self.request.v0, self.s_total, self.request.t0, tf)
        return traj.invert(self.window_entry)


def _make_context(
    request: PlanRequest,
    lane: LaneId,
    protocol: CrossingProtocol,
    layout: IntersectionLayout,
    lateral_buffer: float,
    min_zone_entry: Optional[float],
) -> _SearchContext:
    window = layout.merging_window(request.movement)
    leader = protocol.predecessor_on_lane(lane, request.movement.origin, request.t0)
    occs = [
        protocol.merging_occupancy(entry)
        for entry in protocol.entries
        if conflicts(request.movement, entry.movement)
    ]
    occs.sort(key=lambda o: (o.t_in, o.t_out))
    return _SearchContext(
        request=request,
        lane=lane,
        s_total=layout.total_distance(request.movement),
        window_entry=window.entry,
        window_exit=window.exit,
        caps=_tightened_params(request.params, request.v0),
        leader=leader,
        conflicting=occs,
        lateral_buffer=lateral_buffer,
        min_zone_entry=min_zone_entry,
    )


def _tf_for_zone_entry(
    ctx: _SearchContext, target: float, lo: float, hi: float
) -> Optional[float]:
    """Smallest tf in [lo, hi] whose merging-zone entry time reaches `target`.

    Valid only on the regime where the entry time grows with tf, which holds
    for horizons up to twice the constant-speed horizon; callers cap `hi`
    accordingly and fall back to plain stepping beyond it.
    """
    if ctx.zone_entry(hi) < target:
        return None
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ctx.zone_entry(mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-9:
            break
    return hi


def _search_min_tf(
    ctx: _SearchContext,
    horizon_cap: float,
    resolution: float,
) -> tuple[Optional[float], Optional[CubicTrajectory], BindingConstraint]:
    req = ctx.request
    v0, s_total = req.v0, ctx.s_total
    t_lb = _bounds_lower_bracket(v0, s_total, ctx.caps)
    # Beyond this horizon the terminal speed drops below the floor for good.
    t_ub = 3.0 * s_total / (v0 + 2.0 * ctx.caps.v_min)
    tf_max = req.t0 + min(horizon_cap, t_ub)
    jump_hi = req.t0 + min(2.0 * s_total / v0, min(horizon_cap, t_ub))

    tf = req.t0 + t_lb
    last_bad: Optional[float] = None
    last_fail = _Fail.BOUNDS
    while tf <= tf_max + 1e-12:
        ok, fail, zone_target = ctx.check(tf)
        if ok:
            if last_bad is None:
                traj = solve_boundary(v0, s_total, req.t0, tf)
                return tf, traj, BindingConstraint.BOUNDS
            lo, hi = last_bad, tf
            fail_at_lo = last_fail
            while hi - lo > 1e-9:
                mid = 0.5 * (lo + hi)
                ok_mid, fail_mid, _ = ctx.check(mid)
                if ok_mid:
                    hi = mid
                else:
                    lo, fail_at_lo = mid, fail_mid
            traj = solve_boundary(v0, s_total, req.t0, hi)
            return hi, traj, _FAIL_TO_BINDING[fail_at_lo]
        nxt = tf + resolution
        if zone_target is not None and tf < jump_hi:
            jumped = _tf_for_zone_entry(ctx, zone_target, tf, jump_hi)
            if jumped is not None:
                nxt = max(nxt, jumped)
        last_bad, last_fail = tf, fail
        tf = nxt
    return None, None, _FAIL_TO_BINDING[last_fail]


# ---------------------------------------------------------------------------
# Public planning API
# ---------------------------------------------------------------------------

def feasible_tf(
    request: PlanRequest,
    lane: LaneId,
    tf: float,
    protocol: CrossingProtocol,
    layout: IntersectionLayout,
    *,
    lateral_buffer: float = 0.0,
    min_zone_entry: Optional[float] = None,
) -> bool:
    """The planner's full feasibility predicate for one candidate exit time.

    Exposed so independent searches (e.g. brute-force verification) can use
    exactly the predicate the planner optimizes over.
    """
    if tf <= request.t0:
        return False
    ctx = _make_context(request, lane, protocol, layout, lateral_buffer, min_zone_entry)
    return ctx.check(tf)[0]


def min_feasible_tf(
    request: PlanRequest,
    lane: LaneId,
    protocol: CrossingProtocol,
    layout: IntersectionLayout,
    *,
    lateral_buffer: float = 0.0,
    horizon_cap: float = DEFAULT_HORIZON_CAP,
    resolution: float = DEFAULT_RESOLUTION,
    min_zone_entry: Optional[float] = None,
) -> Optional[float]:
    """Smallest feasible exit time on one lane, or None within the horizon."""
    if lane not in layout.allowed_lanes(request.movement):
        raise ValueError(f"lane {lane} not admissible for movement {request.movement}")
    ctx = _make_context(request, lane, protocol, layout, lateral_buffer, min_zone_entry)
    tf, _, _ = _search_min_tf(ctx, horizon_cap, resolution)
    return tf


def plan_with_diagnostics(
    request: PlanRequest,
    protocol: CrossingProtocol,
    layout: IntersectionLayout,
    *,
    lateral_buffer: float = 0.0,
    horizon_cap: float = DEFAULT_HORIZON_CAP,
    resolution: float = DEFAULT_RESOLUTION,
    min_zone_entry: Optional[float] = None,
) -> tuple[PlanResult, list[LaneCandidate]]:
    """Plan over every admissible lane, returning per-lane search outcomes."""
    candidates: list[LaneCandidate] = []
    for lane in layout.allowed_lanes(request.movement):
        ctx = _make_context(request, lane, protocol, layout, lateral_buffer, min_zone_entry)
        blocked = tuple(
            (occ.t_in - lateral_buffer, occ.t_out + lateral_buffer)
            for occ in ctx.conflicting
        )
        tf, traj, binding = _search_min_tf(ctx, horizon_cap, resolution)
        candidates.append(LaneCandidate(lane, tf, traj, binding, blocked))

    feasible = [c for c in candidates if c.tf is not None]
    if not feasible:
        raise PlanningError(
            request.vehicle_id,
            {c.lane: c.binding_constraint for c in candidates},
        )
    best = min(feasible, key=lambda c: (c.tf, c.lane))
    result = PlanResult(
        lane=best.lane,
        tf=best.tf,
        trajectory=best.trajectory,
        lane_function=LaneFunction.constant(best.lane, request.t0, best.tf),
        binding_constraint=best.binding_constraint,
    )
    return result, candidates


def plan(
    request: PlanRequest,
    protocol: CrossingProtocol,
    layout: IntersectionLayout,
    *,
    lateral_buffer: float = 0.0,
    horizon_cap: float = DEFAULT_HORIZON_CAP,
    resolution: float = DEFAULT_RESOLUTION,
) -> PlanResult:
    """Lane and minimum exit time for an arriving vehicle.

    Ties between lanes break toward the lowest lane index.
    """
    result, _ = plan_with_diagnostics(
        request,
        protocol,
        layout,
        lateral_buffer=lateral_buffer,
        horizon_cap=horizon_cap,
        resolution=resolution,
    )
    return result


def fifo_plan(
    request: PlanRequest,
    protocol: CrossingProtocol,
    layout: IntersectionLayout,
    *,
    lateral_buffer: float = 0.0,
    horizon_cap: float = DEFAULT_HORIZON_CAP,
    resolution: float = DEFAULT_RESOLUTION,
) -> PlanResult:
    """Like `plan`, but the vehicle may not enter the merging zone before any
    earlier-registered vehicle does (strict entry-order queue)."""
    min_zone_entry: Optional[float] = None
    for entry in protocol.entries:
        occ = protocol.merging_occupancy(entry)
        if min_zone_entry is None or occ.t_in > min_zone_entry:
            min_zone_entry = occ.t_in
    result, _ = plan_with_diagnostics(
        request,
        protocol,
        layout,
        lateral_buffer=lateral_buffer,
        horizon_cap=horizon_cap,
        resolution=resolution,
        min_zone_entry=min_zone_entry,
    )
    return result
