"""Gridworld semantics: execution, timing, induced traces, collisions."""

import pytest

from tpoplan.dts import (
    CollisionReport,
    Plan,
    TransitionSystem,
    Trajectory,
    execute,
    induced_trace,
    load_gridworld,
    non_colliding,
    state_at,
)
from tpoplan.errors import InvalidPlanError, MalformedScenarioError
from tpoplan.scenario import parse_scenario


def red_floor_ts():
    return TransitionSystem(
        width=4,
        height=18,
        walls=frozenset(),
        initial_states=((1, 17),),
        labels={(1, 15): "red_floor"},
    )


def test_down_down_example():
    traj = execute(red_floor_ts(), Plan(actions=("down", "down")))
    assert traj.states == ((1, 17), (1, 16), (1, 15))
    assert traj.times == (0.0, 1.0, 2.0)
    trace = induced_trace(red_floor_ts(), traj)
    assert trace.entries == {"red_floor": 2.0}


def test_empty_plan():
    traj = execute(red_floor_ts(), Plan(actions=()))
    assert traj.states == ((1, 17),)
    assert traj.duration == 0.0


def test_move_into_wall_is_invalid():
    ts = TransitionSystem(
        width=2, height=1, walls=frozenset({(1, 0)}),
        initial_states=((0, 0),), labels={},
    )
    with pytest.raises(InvalidPlanError) as err:
        execute(ts, Plan(actions=("right",)))
    assert err.value.step == 0


def test_state_at_piecewise_semantics():
    traj = execute(red_floor_ts(), Plan(actions=("down", "down")))
    assert state_at(traj, 0.5) == (1, 17)
    assert state_at(traj, 2.0) == (1, 15)  # boundary is post-transition
    assert state_at(traj, 99.0) == (1, 15)  # parked forever
    assert state_at(traj, 1.0) == (1, 16)


def test_duration_accumulates_exactly():
    ts = TransitionSystem(
        width=60, height=2, walls=frozenset(), initial_states=((0, 0),), labels={},
        move_durations={"right": 0.1, "left": 0.1},
    )
    steps = ("right", "left") * 500
    traj = execute(ts, Plan(actions=steps))
    assert traj.duration == pytest.approx(100.0, abs=1e-9)


def test_wait_steps_and_trace_collapse():
    ts = red_floor_ts()
    plan = Plan(actions=("down", "down", ("wait", 2.5), "down"))
    traj = execute(ts, plan)
    assert traj.states[2:] == ((1, 15), (1, 15), (1, 14))
    trace = induced_trace(ts, traj)
    assert trace.entries["red_floor"] == pytest.approx(4.5)  # dwell end, not arrival


def test_start_delay_offsets_everything():
    traj = execute(red_floor_ts(), Plan(actions=("down",), start_delay=3.0))
    assert traj.times == (3.0, 4.0)
    assert traj.state_at(1.0) == (1, 17)  # parked at start before departing


class TestCollisions:
    def _line(self, y, n, robot, start_delay=0.0):
        cells = tuple((x, y) for x in range(n))
        times = tuple(start_delay + float(i) for i in range(n))
        return Trajectory(states=cells, times=times, robot_index=robot)

    def test_disjoint_rows_ok(self):
        a, b = self._line(0, 5, 0), self._line(1, 5, 1)
        report = non_colliding([a, b])
        assert report.ok and report.conflict is None

    def test_shared_cell_same_time(self):
        a = Trajectory(states=((0, 0), (1, 0)), times=(0.0, 1.0), robot_index=0)
        b = Trajectory(states=((2, 0), (1, 0)), times=(0.0, 1.0), robot_index=1)
        report = non_colliding([a, b])
        assert not report.ok
        assert report.conflict.cell == (1, 0)
        assert report.conflict.time == pytest.approx(1.0)
        assert set(report.conflict.robots) == {0, 1}

    def test_swap_is_a_collision(self):
        a = Trajectory(states=((0, 0), (1, 0)), times=(0.0, 1.0), robot_index=0)
        b = Trajectory(states=((1, 0), (0, 0)), times=(0.0, 1.0), robot_index=1)
        assert not non_colliding([a, b]).ok

    def test_parked_robot_blocks(self):
        parked = Trajectory(states=((2, 0),), times=(0.0,), robot_index=0)
        mover = Trajectory(
            states=((0, 0), (1, 0), (2, 0)), times=(0.0, 1.0, 2.0), robot_index=1
        )
        assert not non_colliding([parked, mover]).ok

    def test_order_invariance(self):
        a = Trajectory(states=((0, 0), (1, 0)), times=(0.0, 1.0), robot_index=0)
        b = Trajectory(states=((1, 1), (1, 0)), times=(0.0, 1.0), robot_index=1)
        r1 = non_colliding([a, b])
        r2 = non_colliding([b, a])
        assert r1.ok == r2.ok
        assert r1.conflict.time == r2.conflict.time
        assert r1.conflict.cell == r2.conflict.cell

    def test_near_miss_is_fine(self):
        a = Trajectory(states=((0, 0), (1, 0), (2, 0)), times=(0.0, 1.0, 2.0), robot_index=0)
        b = Trajectory(states=((1, 1), (1, 0)), times=(0.0, 2.0), robot_index=1)
        # b arrives at (1,0) only when a has already left
        assert non_colliding([a, b]).ok


MINI = """
{
  "grid": {"width": 2, "height": 1, "walls": []},
  "robots": [[0, 0]],
  "events": {"e_a": [[1, 0]]}
}
"""


def test_load_gridworld_minimal():
    ts = load_gridworld(parse_scenario(MINI))
    assert ts.step((0, 0), "right") == ((1, 0), 1.0)
    assert ts.labels[(1, 0)] == "e_a"


def test_event_on_wall_rejected():
    bad = MINI.replace('"walls": []', '"walls": [[1, 0]]')
    with pytest.raises(MalformedScenarioError):
        parse_scenario(bad)


def test_labeled_start_rejected():
    ts_doc = """
    {
      "grid": {"width": 2, "height": 1, "walls": []},
      "robots": [[0, 0]],
      "events": {"e_a": [[0, 0]]}
    }
    """
    with pytest.raises(MalformedScenarioError):
        parse_scenario(ts_doc)


def test_move_duration_override():
    doc = MINI.replace(
        '"events": {"e_a": [[1, 0]]}',
        '"events": {"e_a": [[1, 0]]}, "options": {"move_duration": 2.5}',
    )
    ts = load_gridworld(parse_scenario(doc))
    assert ts.step((0, 0), "right") == ((1, 0), 2.5)
