import math

import numpy as np
import pytest

from bedside.gridworld import DriftParams, GridMap, RobotState, empty_room, step_robot, with_boxes
from bedside.planner import (
    PlanError,
    PlanRequest,
    UnreachableError,
    corners,
    plan_on_grid,
    plan_path,
    roadmap_route,
    snap_to_roadmap,
    waypoints_to_commands,
)
from bedside.vision import build_roadmap, chamfer_transform, polyline_length, skeletonize, step_weight

from oracles import brute_force_route, corridor, free_path_length, maze_map, random_box_map


def prepared(obs, clearance=4.5):
    f = chamfer_transform(obs)
    sk = skeletonize(f, ~obs, clearance)
    return f, sk, build_roadmap(sk)


def test_snap_on_skeleton_is_fixed_point():
    obs = corridor()
    f, sk, _ = prepared(obs)
    assert snap_to_roadmap((10, 6), f, sk) == ((10, 6), [])


@pytest.mark.parametrize("col", [2, 3, 9, 10])
def test_snap_in_corridor_reaches_midline(col):
    obs = corridor()
    f, sk, _ = prepared(obs)
    pix, access = snap_to_roadmap((10, col), f, sk)
    assert pix[1] == 6
    # access climbs the field monotonically
    vals = [f[p] for p in [(10, col)] + access + [pix]]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_snap_from_walled_pocket_is_unreachable():
    obs = np.zeros((30, 30), bool)
    obs[0, :] = obs[-1, :] = obs[:, 0] = obs[:, -1] = True
    obs[:, 10] = True  # pocket of columns 1..9 is 9 wide: too narrow for clearance 20
    f = chamfer_transform(obs)
    sk = skeletonize(f, ~obs, 20)
    assert not sk[:, :10].any() and sk.any()
    with pytest.raises(UnreachableError):
        snap_to_roadmap((15, 5), f, sk)


def test_start_equals_goal():
    obs = corridor()
    f, sk, rm = prepared(obs)
    plan = plan_path(PlanRequest((4, 3), (4, 3)), rm, f, sk)
    assert plan.waypoints == ((4, 3),) and plan.total_length == 0


def test_corridor_plan_follows_midline():
    obs = corridor(height=30)
    f, sk, rm = prepared(obs)
    plan = plan_path(PlanRequest((3, 6), (25, 6)), rm, f, sk)
    assert all(c == 6 for _, c in plan.waypoints)
    assert plan.waypoints[0] == (3, 6) and plan.waypoints[-1] == (25, 6)
    assert plan.total_length == 3 * (25 - 3)


def test_plan_errors_name_the_cell():
    obs = corridor()
    f, sk, rm = prepared(obs)
    with pytest.raises(PlanError, match=r"row=5, col=0"):
        plan_path(PlanRequest((2, 6), (5, 0)), rm, f, sk)
    with pytest.raises(PlanError, match="outside"):
        plan_path(PlanRequest((2, 6), (50, 6)), rm, f, sk)


def test_plan_is_deterministic():
    g = random_box_map(3)
    a = plan_on_grid(g.obstacles, (5, 5), (40, 40), 4.5)
    b = plan_on_grid(g.obstacles.copy(), (5, 5), (40, 40), 4.5)
    assert a == b


def test_plan_waypoints_are_contiguous_and_free():
    for seed in range(15):
        g = random_box_map(seed)
        f, sk, rm = prepared(g.obstacles)
        rng = np.random.default_rng(seed)
        cand = np.argwhere(g.free & (f >= 6))
        a, b = (tuple(int(v) for v in cand[i]) for i in rng.choice(len(cand), 2, replace=False))
        try:
            plan = plan_path(PlanRequest(a, b), rm, f, sk)
        except PlanError:
            continue  # different clearance components
        w = plan.waypoints
        assert w[0] == a and w[-1] == b
        assert all(g.free[p] for p in w)
        assert all(max(abs(p[0] - q[0]), abs(p[1] - q[1])) == 1 for p, q in zip(w, w[1:]))
        assert plan.total_length == polyline_length(w)
        assert free_path_length(g.free, a, b) <= plan.total_length


def test_route_matches_brute_force_on_small_graphs():
    checked = 0
    for seed in range(40):
        g = random_box_map(seed, n=32, k=(1, 4), size=(3, 8))
        f, sk, rm = prepared(g.obstacles)
        if not 2 <= len(rm.nodes) <= 12:
            continue
        for i in range(len(rm.nodes)):
            for j in range(len(rm.nodes)):
                want = brute_force_route(rm, i, j) if i != j else 0
                try:
                    route = roadmap_route(rm, rm.nodes[i], rm.nodes[j])
                except PlanError:
                    assert want == math.inf
                    continue
                assert polyline_length(route) == want
                assert all(sk[p] for p in route)
                checked += 1
    assert checked > 100


def test_plan_never_fails_within_a_clearance_component():
    for seed in range(10):
        g, rng = maze_map(seed, extra=0.3)
        f, sk, rm = prepared(g.obstacles)
        cand = np.argwhere(g.free & (f >= 6))
        for _ in range(5):
            a, b = (tuple(int(v) for v in cand[i]) for i in rng.choice(len(cand), 2, replace=False))
            plan_path(PlanRequest(a, b), rm, f, sk)


def test_corners_merge_collinear_runs():
    pts = [(0, 0), (0, 1), (0, 2), (1, 3), (2, 4), (2, 5)]
    assert corners(pts) == [(0, 0), (0, 2), (2, 4), (2, 5)]


def test_commands_single_waypoint_is_empty():
    assert waypoints_to_commands([(3, 3)], RobotState(0.35, 0.35), 0.1) == []
    with pytest.raises(ValueError):
        waypoints_to_commands([], RobotState(0.35, 0.35), 0.1)


def test_commands_aligned_case():
    grid = empty_room(20, 20)
    x, y = grid.center_of((5, 3))
    cmds = waypoints_to_commands([(5, 3), (5, 13)], RobotState(x, y, 0.0), 0.1)
    assert len(cmds) == 1
    v, w, dt = cmds[0]
    assert w == 0 and v == pytest.approx(0.3) and v * dt == pytest.approx(1.0)


def test_commands_respect_limits():
    cmds = waypoints_to_commands([(5, 5), (5, 6), (9, 2), (1, 1)], RobotState(0.55, 0.55, 2.0), 0.1)
    assert all(abs(v) <= 0.3 + 1e-12 and abs(w) <= 1.0 + 1e-12 and dt > 0 for v, w, dt in cmds)
    assert all(v == 0 or w == 0 for v, w, _ in cmds)


def execute(grid, robot, cmds, dt=0.05):
    for v, w, total in cmds:
        left = total
        while left > 1e-12:
            step = min(dt, left)
            robot = step_robot(robot, (v, w), step, DriftParams(0.0), grid=grid)
            left -= step
    return robot


def test_closed_loop_execution_reaches_goal():
    for seed in range(20):
        g = random_box_map(seed)
        f, sk, rm = prepared(g.obstacles)
        rng = np.random.default_rng(100 + seed)
        cand = np.argwhere(g.free & (f >= 6))
        a, b = (tuple(int(v) for v in cand[i]) for i in rng.choice(len(cand), 2, replace=False))
        try:
            plan = plan_path(PlanRequest(a, b), rm, f, sk)
        except PlanError:
            continue
        robot = RobotState(*g.center_of(a), float(rng.uniform(-3, 3)))
        end = execute(g, robot, waypoints_to_commands(plan, robot, g.resolution))
        gx, gy = g.center_of(b)
        assert not end.collided
        assert math.hypot(end.x - gx, end.y - gy) <= g.resolution


def test_step_weight():
    assert step_weight((0, 0), (0, 1)) == 3 and step_weight((0, 0), (1, 1)) == 4
