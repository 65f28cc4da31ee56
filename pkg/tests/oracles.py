"""Independent reference implementations and map generators used by the tests."""

import heapq
import itertools
import math

import numpy as np

from bedside.gridworld import GridMap, empty_room, with_boxes

OFFSETS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dy or dx]


def dijkstra_chamfer(obs):
    """Multi-source Dijkstra over the 8-connected pixel graph with 3/4 weights."""
    h, w = obs.shape
    d = np.full((h, w), 10**9, dtype=np.int64)
    pq = []
    for r, c in zip(*np.nonzero(obs)):
        d[r, c] = 0
        pq.append((0, r, c))
    heapq.heapify(pq)
    while pq:
        dd, r, c = heapq.heappop(pq)
        if dd > d[r, c]:
            continue
        for dy, dx in OFFSETS:
            rr, cc = r + dy, c + dx
            if 0 <= rr < h and 0 <= cc < w:
                nd = dd + (4 if dy and dx else 3)
                if nd < d[rr, cc]:
                    d[rr, cc] = nd
                    heapq.heappush(pq, (nd, rr, cc))
    return d


def euclid_distance(obs):
    """Exact Euclidean distance (pixels) to the nearest obstacle pixel, by brute force."""
    pts = np.argwhere(obs)
    rr, cc = np.indices(obs.shape)
    d = np.hypot(rr[..., None] - pts[:, 0], cc[..., None] - pts[:, 1])
    return d.min(axis=-1)


def free_path_length(free, a, b):
    """Shortest 8-connected path over free cells in chamfer units.

    Diagonal moves need both flanking orthogonal cells free, the same rule a
    disc-shaped robot following cell centres obeys. Returns None if unreachable.
    """
    h, w = free.shape
    dist = {a: 0}
    pq = [(0, a)]
    while pq:
        d, p = heapq.heappop(pq)
        if p == b:
            return d
        if d > dist[p]:
            continue
        r, c = p
        for dy, dx in OFFSETS:
            q = (r + dy, c + dx)
            if not (0 <= q[0] < h and 0 <= q[1] < w) or not free[q]:
                continue
            if dy and dx and not (free[r + dy, c] and free[r, c + dx]):
                continue
            nd = d + (4 if dy and dx else 3)
            if nd < dist.get(q, math.inf):
                dist[q] = nd
                heapq.heappush(pq, (nd, q))
    return None


def brute_force_route(roadmap, src, dst):
    """Minimum length over every simple path between two node ids (edge multigraph)."""
    adj = {}
    for e in roadmap.edges:
        adj.setdefault(e.u, []).append((e.v, e.length))
        adj.setdefault(e.v, []).append((e.u, e.length))
    best = math.inf

    def dfs(u, seen, total):
        nonlocal best
        if u == dst:
            best = min(best, total)
            return
        for v, length in adj.get(u, []):
            if v not in seen:
                dfs(v, seen | {v}, total + length)

    dfs(src, {src}, 0)
    return best


def random_box_map(seed, n=48, k=(2, 7), size=(3, 12)):
    rng = np.random.default_rng(seed)
    boxes = []
    for _ in range(rng.integers(*k)):
        h, w = rng.integers(*size, 2)
        r, c = rng.integers(1, n - h), rng.integers(1, n - w)
        boxes.append((r, c, r + h, c + w))
    return with_boxes(empty_room(n, n), boxes)


def maze_map(seed, n=48, pitch=8, extra=0.0):
    """Floor plan of square rooms joined by doorless openings along a random spanning tree.

    Rooms are ``pitch - 2`` cells wide, separated by 2-cell walls; ``extra``
    is the chance of opening each remaining interior wall as well.
    """
    rng = np.random.default_rng(seed)
    k = n // pitch
    obs = np.ones((n, n), bool)
    for i in range(k):
        for j in range(k):
            obs[pitch * i + 1 : pitch * i + pitch - 1, pitch * j + 1 : pitch * j + pitch - 1] = False
    seen, stack, links = {(0, 0)}, [(0, 0)], set()
    while stack:
        i, j = stack[-1]
        nb = [(i + a, j + b) for a, b in ((0, 1), (1, 0), (0, -1), (-1, 0)) if 0 <= i + a < k and 0 <= j + b < k and (i + a, j + b) not in seen]
        if not nb:
            stack.pop()
            continue
        q = nb[rng.integers(len(nb))]
        links.add(((i, j), q))
        seen.add(q)
        stack.append(q)
    for i, j in itertools.product(range(k), range(k)):
        for q in ((i, j + 1), (i + 1, j)):
            if q[0] < k and q[1] < k and rng.random() < extra:
                links.add(((i, j), q))
    for (i, j), (a, b) in links:
        r0, r1 = sorted((i, a))
        c0, c1 = sorted((j, b))
        obs[pitch * r0 + 1 : pitch * r1 + pitch - 1, pitch * c0 + 1 : pitch * c1 + pitch - 1] = False
    return GridMap(obs), rng


def corridor(height=20, gap=11):
    obs = np.zeros((height, gap + 2), bool)
    obs[:, 0] = obs[:, -1] = True
    return obs


def has_2x2(skel):
    return bool((skel[:-1, :-1] & skel[1:, :-1] & skel[:-1, 1:] & skel[1:, 1:]).any())
