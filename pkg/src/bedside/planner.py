"""Route planning on the ridge roadmap.

A route has three parts: an access segment that climbs the distance field
from the start onto the skeleton, a shortest path along roadmap edges, and a
depart segment that leaves the skeleton down to the goal.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import config
from .vision import RoadmapGraph, build_roadmap, chamfer_transform, polyline_length, skeletonize


class PlanError(ValueError):
    pass


class UnreachableError(PlanError):
    pass


class NoPathError(PlanError):
    pass


@dataclass(frozen=True)
class PlanRequest:
    start: tuple
    goal: tuple
    min_clearance: float = 0.0


@dataclass(frozen=True)
class PathPlan:
    waypoints: tuple
    total_length: int
    created_at: float = 0.0


def _moves(free, p):
    """8-neighbours of p reachable without cutting an obstacle corner, in (row, col) order."""
    h, w = free.shape
    r, c = p
    out = []
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if not (dy or dx):
                continue
            rr, cc = r + dy, c + dx
            if not (0 <= rr < h and 0 <= cc < w) or not free[rr, cc]:
                continue
            if dy and dx and not (free[r + dy, c] and free[r, c + dx]):
                continue
            out.append((rr, cc))
    return out


def snap_to_roadmap(point, field, skeleton):
    """Climb from ``point`` onto the skeleton.

    Returns ``(pixel, access)`` where ``access`` lists the cells walked
    before reaching ``pixel`` (empty if the point already lies on the
    skeleton). Steepest ascent is used while it makes progress, with ties
    going to the lowest (row, col); on a plateau or a local maximum off the
    skeleton, a breadth-first search over free cells finishes the job.
    """
    field = np.asarray(field)
    skeleton = np.asarray(skeleton, dtype=bool)
    free = field > 0
    p = tuple(int(v) for v in point)
    if not free[p]:
        raise UnreachableError(f"cell {p} is inside an obstacle")
    access = []
    while not skeleton[p]:
        nbrs = _moves(free, p)
        on_skel = [q for q in nbrs if skeleton[q]]
        pool = on_skel or [q for q in nbrs if field[q] > field[p]]
        if not pool:
            tail = _bfs_to_skeleton(p, free, skeleton)
            return tail[-1], access + tail[:-1]
        access.append(p)
        p = min(pool, key=lambda q: (-field[q], q))
    return p, access


def _bfs_to_skeleton(p, free, skeleton):
    parent = {p: None}
    queue = deque([p])
    while queue:
        cur = queue.popleft()
        if skeleton[cur]:
            path = []
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            return path[::-1]
        for q in _moves(free, cur):
            if q not in parent:
                parent[q] = cur
                queue.append(q)
    raise UnreachableError(f"no skeleton reachable from cell {p}")


def _locate(roadmap: RoadmapGraph, pixel):
    if pixel in roadmap.node_id:
        return roadmap.node_id[pixel], None
    if pixel in roadmap.pixel_edge:
        return None, roadmap.pixel_edge[pixel]
    raise PlanError(f"pixel {pixel} is not on the roadmap")


def _attach(roadmap, adj, virtual, loc):
    """Wire a virtual node sitting inside an edge to that edge's end nodes."""
    k, i = loc
    full = roadmap.edge_polyline(k)
    pos = i + 1
    e = roadmap.edges[k]
    to_u = full[: pos + 1][::-1]
    to_v = full[pos:]
    adj.setdefault(virtual, []).extend([(e.u, to_u), (e.v, to_v)])
    adj.setdefault(e.u, []).append((virtual, to_u[::-1]))
    adj.setdefault(e.v, []).append((virtual, to_v[::-1]))


def roadmap_route(roadmap: RoadmapGraph, a, b):
    """Shortest pixel route between two skeleton pixels along roadmap edges."""
    if a == b:
        return [a]
    n = len(roadmap.nodes)
    adj = {}
    for k, e in enumerate(roadmap.edges):
        path = roadmap.edge_polyline(k)
        adj.setdefault(e.u, []).append((e.v, path))
        adj.setdefault(e.v, []).append((e.u, path[::-1]))
    ids = []
    for virtual, pix in ((n, a), (n + 1, b)):
        node, loc = _locate(roadmap, pix)
        if node is not None:
            ids.append(node)
        else:
            _attach(roadmap, adj, virtual, loc)
            ids.append(virtual)
    src, dst = ids
    la, lb = (_locate(roadmap, a)[1], _locate(roadmap, b)[1])
    if la is not None and lb is not None and la[0] == lb[0]:
        full = roadmap.edge_polyline(la[0])
        i, j = la[1] + 1, lb[1] + 1
        seg = full[i : j + 1] if i <= j else full[j : i + 1][::-1]
        adj[src].append((dst, seg))
        adj[dst].append((src, seg[::-1]))

    for u in adj:
        adj[u].sort(key=lambda t: (polyline_length(t[1]), t[0]))
    dist = {src: 0}
    prev = {}
    heap = [(0, src)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == dst:
            break
        for v, path in adj.get(u, ()):
            nd = d + polyline_length(path)
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = (u, path)
                heapq.heappush(heap, (nd, v))
    if dst not in done:
        raise NoPathError(f"skeleton pixels {a} and {b} lie in different roadmap components")
    route = [roadmap.nodes[dst] if dst < n else b]
    node = dst
    while node != src:
        u, path = prev[node]
        route.extend(path[::-1][1:])
        node = u
    return route[::-1]


def _dedupe(cells):
    out = []
    for p in cells:
        if not out or out[-1] != p:
            out.append(p)
    return out


def plan_path(req: PlanRequest, roadmap: RoadmapGraph, field, skeleton, now: float = 0.0) -> PathPlan:
    field = np.asarray(field)
    h, w = field.shape
    for name, p in (("start", req.start), ("goal", req.goal)):
        r, c = p
        if not (0 <= r < h and 0 <= c < w):
            raise PlanError(f"{name} cell (row={r}, col={c}) is outside the map")
        if field[r, c] <= 0:
            raise PlanError(f"{name} cell (row={r}, col={c}) is inside an obstacle")
    start = tuple(map(int, req.start))
    goal = tuple(map(int, req.goal))
    if start == goal:
        return PathPlan((start,), 0, now)
    s, access = snap_to_roadmap(start, field, skeleton)
    g, depart = snap_to_roadmap(goal, field, skeleton)
    route = roadmap_route(roadmap, s, g)
    cells = _dedupe(access + route + depart[::-1])
    return PathPlan(tuple(cells), polyline_length(cells), now)


def corners(waypoints):
    """Drop waypoints that sit in the middle of a straight run."""
    pts = list(waypoints)
    if len(pts) <= 2:
        return pts
    out = [pts[0]]
    for a, b, c in zip(pts, pts[1:], pts[2:]):
        if (b[0] - a[0], b[1] - a[1]) != (c[0] - b[0], c[1] - b[1]):
            out.append(b)
    out.append(pts[-1])
    return out


def waypoints_to_commands(plan, robot, resolution, v_max=config.V_MAX, w_max=config.W_MAX):
    """Turn-then-drive command list ``[(v, omega, dt), ...]``.

    Commands are computed from the robot's odometry estimate, since that is
    all the robot knows about its own pose.
    """
    pts = plan.waypoints if isinstance(plan, PathPlan) else tuple(plan)
    if len(pts) == 0:
        raise ValueError("plan has no waypoints")
    x, y, th = robot.x_hat, robot.y_hat, robot.theta_hat
    cmds = []
    for r, c in corners(pts)[1:]:
        tx, ty = (c + 0.5) * resolution, (r + 0.5) * resolution
        dist = math.hypot(tx - x, ty - y)
        if dist < 1e-9:
            continue
        heading = math.atan2(ty - y, tx - x)
        turn = (heading - th + math.pi) % (2 * math.pi) - math.pi
        if abs(turn) > 1e-9:
            cmds.append((0.0, math.copysign(w_max, turn), abs(turn) / w_max))
        cmds.append((v_max, 0.0, dist / v_max))
        x, y, th = tx, ty, heading
    return cmds



def plan_on_grid(obstacles, start, goal, min_clearance, now: float = 0.0) -> PathPlan:
    """Distance field, skeleton, roadmap and plan for one obstacle image."""
    obstacles = np.asarray(obstacles, dtype=bool)
    dist = chamfer_transform(obstacles)
    skel = skeletonize(dist, ~obstacles, min_clearance)
    roadmap = build_roadmap(skel)
    return plan_path(PlanRequest(tuple(start), tuple(goal), min_clearance), roadmap, dist, skel, now)
