"""Tests for Random Waypoint traces."""

import math

import numpy as np
import pytest

from src.simulation.mobility import (
    Leg,
    MobilityTrace,
    Point,
    generate_trace,
    position_at,
    read_trace,
    write_trace,
)

AREA = (100.0, 100.0)


def stepped_position(legs: list[Leg], t_end: float, dt: float = 1e-3) -> tuple[float, float]:
    """Integrate the legs in dt steps, splitting a step that crosses a waypoint."""
    x, y = legs[0].start.x, legs[0].start.y
    t = 0.0
    index = 0
    while t < t_end - 1e-12:
        step_end = min(t + dt, t_end)
        while t < step_end - 1e-15:
            leg = legs[index]
            segment_end = min(step_end, leg.end_time)
            vx, vy = leg.velocity
            x += vx * (segment_end - t)
            y += vy * (segment_end - t)
            t = segment_end
            if t >= leg.end_time and index + 1 < len(legs):
                index += 1
                x, y = legs[index].start.x, legs[index].start.y
    return x, y


def test_zero_vmax_node_is_stationary():
    trace = generate_trace(seed=3, num_nodes=1, area=AREA, vmax=0.0, horizon=10.0)

    positions = {position_at(trace, 0, t) for t in (0.0, 2.5, 7.0, 10.0)}

    assert len(positions) == 1


def test_positions_stay_inside_the_area():
    trace = generate_trace(seed=5, num_nodes=100, area=AREA, vmax=3.0, horizon=1000.0)

    for t in np.linspace(0.0, 1000.0, 101):
        positions = trace.positions_at(float(t))
        assert positions.min() >= 0.0
        assert positions.max() <= 100.0


def test_position_matches_time_stepping():
    trace = generate_trace(seed=9, num_nodes=1, area=AREA, vmax=10.0, horizon=1000.0)
    legs = trace.legs[0]

    for t_end in (0.5, 3.0, 7.25, 20.0):
        expected = stepped_position(legs, t_end)
        actual = position_at(trace, 0, t_end)
        assert math.hypot(actual.x - expected[0], actual.y - expected[1]) < 1e-6


def test_uniform_motion_along_a_leg():
    legs = [Leg(Point(0.0, 0.0), Point(10.0, 0.0), 2.0, 0.0), Leg(Point(10.0, 0.0), Point(10.0, 10.0), 1.0, 5.0)]
    trace = MobilityTrace(legs=[legs], horizon=20.0, vmax=2.0, seed=0)

    assert position_at(trace, 0, 2.5) == Point(5.0, 0.0)
    # waypoint reached at t = 5: end of the first leg, start of the second
    assert position_at(trace, 0, 5.0) == Point(10.0, 0.0)
    assert position_at(trace, 0, 7.0) == Point(10.0, 2.0)


def test_generation_is_deterministic():
    a = generate_trace(seed=11, num_nodes=5, area=AREA, vmax=10.0, horizon=100.0)
    b = generate_trace(seed=11, num_nodes=5, area=AREA, vmax=10.0, horizon=100.0)
    c = generate_trace(seed=12, num_nodes=5, area=AREA, vmax=10.0, horizon=100.0)

    assert a.legs == b.legs
    assert a.legs != c.legs


def test_legs_are_contiguous_and_cover_the_horizon():
    trace = generate_trace(seed=2, num_nodes=10, area=AREA, vmax=10.0, horizon=200.0)

    for legs in trace.legs:
        assert legs[0].start_time == 0.0
        assert legs[-1].end_time > 200.0
        for current, following in zip(legs, legs[1:]):
            assert following.start_time == current.end_time
            assert following.start == current.target
        assert all(0.0 < leg.speed <= 10.0 for leg in legs)


def test_motion_is_continuous():
    vmax, eps = 10.0, 0.01
    trace = generate_trace(seed=4, num_nodes=3, area=AREA, vmax=vmax, horizon=100.0)

    for t in np.linspace(0.0, 100.0 - eps, 501):
        for node in range(3):
            p = position_at(trace, node, float(t))
            q = position_at(trace, node, float(t) + eps)
            assert p.distance_to(q) <= vmax * eps + 1e-9


def test_anchored_node_never_moves():
    sink = Point(100.0, 100.0)
    trace = generate_trace(seed=1, num_nodes=4, area=AREA, vmax=10.0, horizon=50.0, anchors={0: sink})

    assert all(position_at(trace, 0, t) == sink for t in (0.0, 13.3, 50.0))
    assert trace.velocities_at(20.0)[0].tolist() == [0.0, 0.0]


def test_rejects_invalid_arguments():
    with pytest.raises(ValueError, match="Area"):
        generate_trace(seed=1, num_nodes=1, area=(0.0, 100.0), vmax=1.0, horizon=10.0)
    with pytest.raises(ValueError, match="horizon"):
        generate_trace(seed=1, num_nodes=1, area=AREA, vmax=1.0, horizon=0.0)

    trace = generate_trace(seed=1, num_nodes=1, area=AREA, vmax=1.0, horizon=10.0)
    with pytest.raises(ValueError, match="outside trace horizon"):
        position_at(trace, 0, 10.5)


def test_trace_file_preserves_positions(tmp_path):
    trace = generate_trace(seed=8, num_nodes=6, area=AREA, vmax=10.0, horizon=60.0)
    path = tmp_path / "trace_v10_s8.txt"

    write_trace(trace, path)
    loaded = read_trace(path)

    assert path.read_text().splitlines()[0] == "6 60.0 10.0 8"
    assert loaded.legs == trace.legs
    assert np.array_equal(loaded.positions_at(33.3), trace.positions_at(33.3))


@pytest.mark.parametrize("node", [2, -1])
def test_trace_file_rejects_unknown_node(tmp_path, node):
    path = tmp_path / "trace.txt"
    path.write_text(f"2 10.0 1.0 1\n0 0.0 1.0 1.0 2.0 2.0 0.5\n{node} 0.0 5.0 5.0 6.0 6.0 0.5\n")

    with pytest.raises(ValueError, match=f"node id {node} out of range"):
        read_trace(path)
