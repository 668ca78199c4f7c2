import math

import pytest

from cavcross import (
    Cardinal,
    CrossingProtocol,
    DuplicateVehicleError,
    LaneFunction,
    LanePiece,
    Movement,
    ProtocolEntry,
    solve_boundary,
)

import oracles

W, E, N, S = Cardinal.W, Cardinal.E, Cardinal.N, Cardinal.S


def constant_speed_entry(vehicle_id, lane, movement, v0=10.0, t0=0.0, s=275.0):
    traj = solve_boundary(v0, s, t0, t0 + s / v0)
    return oracles.make_entry(vehicle_id, traj, movement, lane)


class TestLaneFunction:
    def test_constant(self):
        lf = LaneFunction.constant(3, 0.0, 10.0)
        assert lf.lane_at(0.0) == 3
        assert lf.lane_at(9.999) == 3
        assert lf.terminal_lane == 3

    def test_partition_validation(self):
        with pytest.raises(ValueError):
            LaneFunction((LanePiece(0.0, 5.0, 1), LanePiece(6.0, 10.0, 2)))
        with pytest.raises(ValueError):
            LaneFunction((LanePiece(0.0, 0.0, 1),))
        with pytest.raises(ValueError):
            LaneFunction(())

    def test_piecewise_lookup(self):
        lf = LaneFunction((LanePiece(0.0, 4.0, 1), LanePiece(4.0, 10.0, 2)))
        assert lf.lane_at(2.0) == 1
        assert lf.lane_at(4.5) == 2
        assert lf.terminal_lane == 2
        with pytest.raises(ValueError):
            lf.lane_at(11.0)


class TestRegister:
    def test_register_into_empty(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        protocol.register(constant_speed_entry("v1", lane, Movement(W, E)))
        assert len(protocol) == 1
        assert protocol.get("v1").vehicle_id == "v1"

    def test_duplicate_rejected(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        protocol.register(constant_speed_entry("v1", lane, Movement(W, E)))
        with pytest.raises(DuplicateVehicleError):
            protocol.register(constant_speed_entry("v1", lane, Movement(W, E)))

    def test_six_vehicles_query_consistent(self, layout):
        protocol = CrossingProtocol(layout)
        movements = [Movement(W, E), Movement(W, E), Movement(N, S),
                     Movement(E, W), Movement(N, E), Movement(W, S)]
        for i, (movement, t0) in enumerate(zip(movements, [0.0, 2.0, 2.5, 3.5, 5.0, 6.5])):
            lane = layout.allowed_lanes(movement)[0]
            s = layout.total_distance(movement)
            protocol.register(
                constant_speed_entry(f"v{i}", lane, movement, v0=10.0, t0=t0, s=s)
            )
        assert len(protocol) == 6
        assert {e.vehicle_id for e in protocol.entries} == {f"v{i}" for i in range(6)}

    def test_wrong_lane_rejected(self, layout):
        protocol = CrossingProtocol(layout)
        right_turn = Movement(W, S)
        wrong_lane = layout.allowed_lanes(Movement(N, S))[0]
        with pytest.raises(ValueError):
            protocol.register(
                constant_speed_entry("v1", wrong_lane, right_turn, s=269.0)
            )


class TestActiveEntries:
    def test_membership_by_window(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        protocol.register(constant_speed_entry("a", lane, Movement(W, E), t0=0.0))
        protocol.register(constant_speed_entry("b", lane, Movement(W, E), t0=5.0))
        assert protocol.active_entries(-1.0) == ()
        assert [e.vehicle_id for e in protocol.active_entries(2.0)] == ["a"]
        assert [e.vehicle_id for e in protocol.active_entries(6.0)] == ["a", "b"]
        # first vehicle exits at 27.5
        assert [e.vehicle_id for e in protocol.active_entries(28.0)] == ["b"]

    def test_exited_entries_are_retained_but_inactive(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        protocol.register(constant_speed_entry("a", lane, Movement(W, E)))
        assert protocol.active_entries(100.0) == ()
        assert len(protocol.entries) == 1


class TestPredecessorOnLane:
    def test_empty_lane(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        assert protocol.predecessor_on_lane(lane, W, 0.0) is None

    def test_single_vehicle_ahead(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        protocol.register(constant_speed_entry("lead", lane, Movement(W, E), t0=0.0))
        found = protocol.predecessor_on_lane(lane, W, 3.0)
        assert found is not None and found.vehicle_id == "lead"

    def test_nearest_of_two(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        protocol.register(constant_speed_entry("far", lane, Movement(W, E), t0=0.0))
        protocol.register(constant_speed_entry("near", lane, Movement(W, E), t0=3.0))
        found = protocol.predecessor_on_lane(lane, W, 5.0)
        assert found is not None and found.vehicle_id == "near"

    def test_other_approach_ignored(self, layout):
        protocol = CrossingProtocol(layout)
        lane_ns = layout.allowed_lanes(Movement(N, S))[0]
        protocol.register(constant_speed_entry("cross", lane_ns, Movement(N, S)))
        lane_we = layout.allowed_lanes(Movement(W, E))[0]
        assert protocol.predecessor_on_lane(lane_we, W, 1.0) is None

    def test_lane_approach_mismatch_raises(self, layout):
        protocol = CrossingProtocol(layout)
        lane_we = layout.allowed_lanes(Movement(W, E))[0]
        with pytest.raises(ValueError):
            protocol.predecessor_on_lane(lane_we, N, 0.0)


class TestMergingOccupancy:
    def test_constant_speed_window(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        protocol.register(constant_speed_entry("a", lane, Movement(W, E)))
        occ = protocol.merging_occupancy(protocol.get("a"))
        assert occ.t_in == pytest.approx(12.5, abs=1e-9)
        assert occ.t_out == pytest.approx(15.0, abs=1e-9)

    def test_ordering_and_containment(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        traj = solve_boundary(10.0, 275.0, 1.0, 23.0)
        protocol.register(oracles.make_entry("a", traj, Movement(W, E), lane))
        occ = protocol.merging_occupancy(protocol.get("a"))
        assert traj.t0 < occ.t_in < occ.t_out < traj.tf

    def test_right_turn_window_by_inversion(self, layout):
        movement = Movement(W, S)
        lane = layout.allowed_lanes(movement)[0]
        s = layout.total_distance(movement)
        protocol = CrossingProtocol(layout)
        traj = solve_boundary(10.0, s, 0.0, 24.0)
        protocol.register(oracles.make_entry("a", traj, movement, lane))
        occ = protocol.merging_occupancy(protocol.get("a"))
        window = layout.merging_window(movement)
        assert traj.eval(occ.t_in).position == pytest.approx(window.entry, abs=1e-7)
        assert traj.eval(occ.t_out).position == pytest.approx(window.exit, abs=1e-7)
        assert window.exit - window.entry == pytest.approx(math.pi * 6.25)

    def test_unregistered_entry_rejected(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        entry = constant_speed_entry("ghost", lane, Movement(W, E))
        with pytest.raises(KeyError):
            protocol.merging_occupancy(entry)


class TestSerialization:
    def test_records_round_trip_fields(self, layout):
        protocol = CrossingProtocol(layout)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        traj = solve_boundary(10.0, 275.0, 0.0, 25.0)
        protocol.register(oracles.make_entry("a", traj, Movement(W, E), lane))
        (record,) = protocol.to_records()
        assert record["vehicle_id"] == "a"
        assert record["movement"] == {"from": "W", "to": "E", "turn": "straight"}
        assert record["position_coeffs"] == [traj.c3, traj.c2, traj.c1, traj.c0]
        assert record["t0_s"] == 0.0 and record["tf_s"] == 25.0
        assert record["lane_intervals"] == [[0.0, 25.0, lane]]
        assert record["time_of_position_max_residual_s"] >= 0.0


class TestEntryValidation:
    def test_window_mismatch_rejected(self, layout):
        traj = solve_boundary(10.0, 275.0, 0.0, 25.0)
        lane = layout.allowed_lanes(Movement(W, E))[0]
        with pytest.raises(ValueError):
            ProtocolEntry(
                vehicle_id="bad",
                trajectory=traj,
                inverse_fit=traj.inverse_cubic_fit(),
                lane_function=LaneFunction.constant(lane, 0.0, 24.0),
                movement=Movement(W, E),
            )
