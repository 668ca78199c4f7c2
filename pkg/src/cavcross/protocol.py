"""Crossing protocol: the intersection's shared store of planned trajectories.

Every vehicle that enters the control zone registers its planned motion law,
lane schedule and movement here before it starts driving; all later arrivals
plan against the registered set.  Entries are append-only and are kept after
their vehicle exits (metrics need them) but drop out of the active set.
Reads are assumed instantaneous and exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

from .geometry import Cardinal, IntersectionLayout, LaneId, Movement
from .trajectory import CubicTrajectory, InverseFit


class DuplicateVehicleError(ValueError):
    """A vehicle id was registered twice."""


@dataclass(frozen=True)
class LanePiece:
    start: float
    end: float
    lane: LaneId


@dataclass(frozen=True)
class LaneFunction:
    """Piecewise-constant lane occupancy over a trajectory's time window."""

    pieces: tuple[LanePiece, ...]

    def __post_init__(self) -> None:
        if not self.pieces:
            raise ValueError("lane function needs at least one piece")
        for piece in self.pieces:
            if piece.end <= piece.start:
                raise ValueError("lane piece must have positive duration")
        for prev, nxt in zip(self.pieces, self.pieces[1:]):
            if abs(nxt.start - prev.end) > 1e-9:
                raise ValueError("lane pieces must partition the window without gaps")

    @classmethod
    def constant(cls, lane: LaneId, t0: float, tf: float) -> "LaneFunction":
        return cls((LanePiece(t0, tf, lane),))

    @property
    def start(self) -> float:
        return self.pieces[0].start

    @property
    def end(self) -> float:
        return self.pieces[-1].end

    @property
    def terminal_lane(self) -> LaneId:
        return self.pieces[-1].lane

    def lane_at(self, t: float) -> LaneId:
        if t < self.start - 1e-9 or t > self.end + 1e-9:
            raise ValueError(f"t={t} outside lane function window")
        for piece in self.pieces:
            if t < piece.end:
                return piece.lane
        return self.pieces[-1].lane


@dataclass(frozen=True)
class ProtocolEntry:
    """One vehicle's published plan: motion law, inverse fit, lanes, movement."""

    vehicle_id: str
    trajectory: CubicTrajectory
    inverse_fit: InverseFit
    lane_function: LaneFunction
    movement: Movement

    def __post_init__(self) -> None:
        if abs(self.lane_function.start - self.trajectory.t0) > 1e-9 or abs(
            self.lane_function.end - self.trajectory.tf
        ) > 1e-9:
            raise ValueError("lane function window must equal the trajectory window")

    @property
    def t0(self) -> float:
        return self.trajectory.t0

    @property
    def tf(self) -> float:
        return self.trajectory.tf


class Occupancy(NamedTuple):
    """Time interval a vehicle spends inside the merging zone."""

    t_in: float
    t_out: float


class CrossingProtocol:
    """Append-only registry of protocol entries for one intersection."""

    def __init__(self, layout: IntersectionLayout):
        self.layout = layout
        self._entries: list[ProtocolEntry] = []
        self._by_id: dict[str, ProtocolEntry] = {}
        self._occupancy: dict[str, Occupancy] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[ProtocolEntry]:
        return iter(self._entries)

    @property
    def entries(self) -> tuple[ProtocolEntry, ...]:
        return tuple(self._entries)

    def get(self, vehicle_id: str) -> ProtocolEntry:
        return self._by_id[vehicle_id]

    def register(self, entry: ProtocolEntry) -> None:
        if entry.vehicle_id in self._by_id:
            raise DuplicateVehicleError(
                f"vehicle {entry.vehicle_id!r} is already registered"
            )
        terminal = entry.lane_function.terminal_lane
        if terminal not in self.layout.allowed_lanes(entry.movement):
            raise ValueError(
                f"vehicle {entry.vehicle_id!r}: lane {terminal} is not admissible "
                f"for movement {entry.movement}"
            )
        if not entry.trajectory.is_monotone:
            raise ValueError(
                f"vehicle {entry.vehicle_id!r}: trajectory must move strictly forward"
            )
        window = self.layout.merging_window(entry.movement)
        occ = Occupancy(
            entry.trajectory.invert(window.entry),
            entry.trajectory.invert(window.exit),
        )
        self._entries.append(entry)
        self._by_id[entry.vehicle_id] = entry
        self._occupancy[entry.vehicle_id] = occ

    def active_entries(self, t: float) -> tuple[ProtocolEntry, ...]:
        """Entries whose trajectory window contains time t."""
        return tuple(e for e in self._entries if e.t0 <= t <= e.tf)

    def predecessor_on_lane(
        self, lane: LaneId, approach: Cardinal, t: float
    ) -> Optional[ProtocolEntry]:
        """Nearest active vehicle ahead on the given approach lane at time t."""
        if self.layout.lane_approach(lane) != approach:
            raise ValueError(f"lane {lane} does not belong to approach {approach.value}")
        best: Optional[ProtocolEntry] = None
        best_pos = float("inf")
        for entry in self._entries:
            if entry.movement.origin != approach:
                continue
            if not entry.t0 <= t <= entry.tf:
                continue
            if entry.lane_function.lane_at(t) != lane:
                continue
            pos = entry.trajectory.eval(t).position
            if pos < best_pos:
                best, best_pos = entry, pos
        return best

    def merging_occupancy(self, entry: ProtocolEntry) -> Occupancy:
        """Merging-zone entry/exit times of a registered entry (precomputed)."""
        try:
            return self._occupancy[entry.vehicle_id]
        except KeyError:
            raise KeyError(
                f"vehicle {entry.vehicle_id!r} is not registered with this protocol"
            ) from None

    def to_records(self) -> list[dict]:
        """Serializable dump: one record per entry, in registration order."""
        records = []
        for entry in self._entries:
            traj = entry.trajectory
            fit = entry.inverse_fit
            records.append(
                {
                    "vehicle_id": entry.vehicle_id,
                    "movement": {
                        "from": entry.movement.origin.value,
                        "to": entry.movement.exit.value,
                        "turn": entry.movement.turn_kind.value,
                    },
                    "t0_s": traj.t0,
                    "tf_s": traj.tf,
                    "total_distance_m": traj.s_total,
                    # position coefficients in time shifted to t0, cubic first
                    "position_coeffs": [traj.c3, traj.c2, traj.c1, traj.c0],
                    # fitted time-of-position coefficients in absolute seconds
                    "time_of_position_coeffs": [fit.c3, fit.c2, fit.c1, fit.c0],
                    "time_of_position_max_residual_s": fit.max_residual,
                    "lane_intervals": [
                        [p.start, p.end, p.lane] for p in entry.lane_function.pieces
                    ],
                }
            )
        return records
