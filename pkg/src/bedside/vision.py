"""Overhead-camera processing: robot detection, obstacle segmentation,
chamfer distance field, thinned ridge skeleton and the roadmap graph.

Images are plain numpy arrays indexed ``[row, col]``. Binary images are bool
arrays; distance fields are int64 arrays in chamfer units (3 per orthogonal
step, 4 per diagonal step).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import config

ORTHO = 3
DIAG = 4

# counter-clockwise from east, as used by the Yokoi connectivity number
_RING = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))
_NEIGH8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def step_weight(a, b) -> int:
    return DIAG if a[0] != b[0] and a[1] != b[1] else ORTHO


def polyline_length(pixels) -> int:
    return sum(step_weight(a, b) for a, b in zip(pixels, pixels[1:]))


def default_min_clearance(radius_cells: float) -> float:
    return radius_cells * ORTHO


def background_subtract(frame, background, threshold=config.BGSUB_THRESHOLD) -> np.ndarray:
    frame = np.asarray(frame)
    background = np.asarray(background)
    if frame.shape != background.shape:
        raise ValueError(f"frame {frame.shape} and background {background.shape} differ in size")
    if not 0 < threshold < 255:
        raise ValueError("threshold must lie in (0, 255)")
    return np.abs(frame.astype(np.int32) - background.astype(np.int32)) > threshold


def mean_shift_filter(
    frame,
    spatial_bw=config.MS_SPATIAL_BW,
    range_bw=config.MS_RANGE_BW,
    max_iter=config.MS_MAX_ITER,
    tol=config.MS_TOL,
) -> np.ndarray:
    """Joint (row, col, intensity) mean-shift with a flat kernel.

    Every pixel climbs to its mode; the returned array holds the intensity
    component of each pixel's mode.
    """
    if spatial_bw <= 0 or range_bw <= 0:
        raise ValueError("bandwidths must be positive")
    img = np.asarray(frame, dtype=float)
    h, w = img.shape
    ys, xs = np.mgrid[0:h, 0:w]
    ys = ys.astype(float).ravel()
    xs = xs.astype(float).ravel()
    vs = img.ravel().copy()
    reach = int(np.ceil(spatial_bw)) + 1
    offsets = [(dy, dx) for dy in range(-reach, reach + 1) for dx in range(-reach, reach + 1)]
    active = np.ones(ys.shape, dtype=bool)

    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        y, x, v = ys[idx], xs[idx], vs[idx]
        cy = np.rint(y).astype(int)
        cx = np.rint(x).astype(int)
        sy = np.zeros_like(y)
        sx = np.zeros_like(y)
        sv = np.zeros_like(y)
        n = np.zeros_like(y)
        for dy, dx in offsets:
            ny = cy + dy
            nx = cx + dx
            inside = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
            val = img[np.clip(ny, 0, h - 1), np.clip(nx, 0, w - 1)]
            ok = inside & ((ny - y) ** 2 + (nx - x) ** 2 <= spatial_bw**2) & (np.abs(val - v) <= range_bw)
            sy += np.where(ok, ny, 0)
            sx += np.where(ok, nx, 0)
            sv += np.where(ok, val, 0)
            n += ok
        has = n > 0
        ny_ = np.where(has, sy / np.maximum(n, 1), y)
        nx_ = np.where(has, sx / np.maximum(n, 1), x)
        nv_ = np.where(has, sv / np.maximum(n, 1), v)
        shift = np.sqrt((ny_ - y) ** 2 + (nx_ - x) ** 2 + (nv_ - v) ** 2)
        ys[idx], xs[idx], vs[idx] = ny_, nx_, nv_
        active[idx[shift < tol]] = False
    return vs.reshape(h, w)


def _merge_small(comp, n, values, min_region):
    """Fold components smaller than ``min_region`` into the most similar 4-neighbour."""
    h, w = comp.shape
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    pairs = set()
    for a, b in ((comp[:, :-1], comp[:, 1:]), (comp[:-1, :], comp[1:, :])):
        m = a != b
        for i, j in zip(a[m].tolist(), b[m].tolist()):
            pairs.add((min(i, j), max(i, j)))
    size = np.bincount(comp.ravel(), minlength=n).astype(float)
    total = np.bincount(comp.ravel(), weights=values.ravel(), minlength=n)
    size = size.tolist()
    total = total.tolist()
    adj = {i: set() for i in range(n)}
    for i, j in pairs:
        adj[i].add(j)
        adj[j].add(i)
    alive = set(range(n))
    while True:
        small = sorted((size[i], i) for i in alive if size[i] < min_region and adj[i])
        if not small:
            break
        _, i = small[0]
        mean_i = total[i] / size[i]
        j = min(adj[i], key=lambda k: (abs(total[k] / size[k] - mean_i), k))
        parent[i] = j
        size[j] += size[i]
        total[j] += total[i]
        for k in adj[i]:
            if k != j:
                adj[k].discard(i)
                adj[k].add(j)
                adj[j].add(k)
        adj[j].discard(i)
        alive.discard(i)
    roots = np.array([find(i) for i in range(n)])
    return roots[comp], np.array(total) / np.maximum(np.array(size), 1)


def mean_shift_segment(
    frame,
    spatial_bw=config.MS_SPATIAL_BW,
    range_bw=config.MS_RANGE_BW,
    min_region=config.MS_MIN_REGION,
) -> np.ndarray:
    """Label image of mean-shift regions.

    Label 0 marks background, i.e. every region whose mean intensity is
    within ``range_bw`` of the brightest region. Other regions are numbered
    from 1 in raster order of their first pixel.
    """
    filtered = mean_shift_filter(frame, spatial_bw, range_bw)
    h, w = filtered.shape
    ids = np.arange(h * w).reshape(h, w)
    rows, cols = [], []
    for a, b, fa, fb in (
        (ids[:, :-1], ids[:, 1:], filtered[:, :-1], filtered[:, 1:]),
        (ids[:-1, :], ids[1:, :], filtered[:-1, :], filtered[1:, :]),
    ):
        m = np.abs(fa - fb) <= range_bw
        rows.append(a[m])
        cols.append(b[m])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    graph = coo_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(h * w, h * w))
    n, comp = connected_components(graph, directed=False)
    comp = comp.reshape(h, w)
    merged, means = _merge_small(comp, n, filtered, min_region)

    roots = np.unique(merged)
    brightest = max(means[k] for k in roots)
    labels = np.zeros((h, w), dtype=np.int32)
    order = {}
    for k in merged.ravel().tolist():
        if k not in order:
            order[k] = len(order)
    next_label = 1
    for k in sorted(roots, key=order.__getitem__):
        if brightest - means[k] <= range_bw:
            continue
        labels[merged == k] = next_label
        next_label += 1
    return labels


def chamfer_transform(obstacles) -> np.ndarray:
    """Two-pass 3-4 chamfer distance to the nearest obstacle pixel.

    Each pass first folds in the previous (next) row, then resolves the
    in-row dependency with a running minimum, which is equivalent to the
    pixel-by-pixel raster sweep.
    """
    obs = np.asarray(obstacles, dtype=bool)
    if not obs.any():
        raise ValueError("distance field undefined: image has no obstacle pixels")
    h, w = obs.shape
    big = np.int64(ORTHO * (h + w) * 4 + 1)
    d = np.where(obs, 0, big).astype(np.int64)
    ramp = ORTHO * np.arange(w, dtype=np.int64)

    for r in range(h):
        row = d[r]
        if r > 0:
            up = d[r - 1]
            np.minimum(row, up + ORTHO, out=row)
            np.minimum(row[1:], up[:-1] + DIAG, out=row[1:])
            np.minimum(row[:-1], up[1:] + DIAG, out=row[:-1])
        row[:] = np.minimum.accumulate(row - ramp) + ramp
    for r in range(h - 1, -1, -1):
        row = d[r]
        if r < h - 1:
            down = d[r + 1]
            np.minimum(row, down + ORTHO, out=row)
            np.minimum(row[1:], down[:-1] + DIAG, out=row[1:])
            np.minimum(row[:-1], down[1:] + DIAG, out=row[:-1])
        row[:] = np.minimum.accumulate((row + ramp)[::-1])[::-1] - ramp
    return d


def ridge_mask(dist) -> np.ndarray:
    """Pixels that are a strict-on-one-side local maximum along some axis.

    A pixel qualifies for a direction if it is >= both neighbours along it
    and > at least one. Off-image neighbours copy the edge value.
    """
    f = np.asarray(dist)
    p = np.pad(f, 1, mode="edge")
    h, w = f.shape
    out = np.zeros((h, w), dtype=bool)
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        a = p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        b = p[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        out |= (f >= a) & (f >= b) & ((f > a) | (f > b))
    return out


def _is_simple(img, r, c) -> bool:
    # Yokoi 8-connectivity number; img is zero-padded so r, c are padded coords
    x = [1 - int(img[r + dy, c + dx]) for dy, dx in _RING]
    n = 0
    for k in (0, 2, 4, 6):
        n += x[k] - x[k] * x[(k + 1) % 8] * x[(k + 2) % 8]
    return n == 1


def _n_neighbors(img, r, c) -> int:
    return sum(int(img[r + dy, c + dx]) for dy, dx in _NEIGH8)


def skeletonize(dist, free, min_clearance) -> np.ndarray:
    """Thin the clearance ridge of ``dist`` to a one-pixel-wide skeleton.

    Pixels of the admissible set (free and at least ``min_clearance`` from
    obstacles) are peeled in increasing order of distance, deleting only
    simple points; ridge pixels are never peeled. A second pass breaks any
    remaining 2x2 blocks, again deleting only simple points.
    """
    dist = np.asarray(dist)
    free = np.asarray(free, dtype=bool)
    if dist.shape != free.shape:
        raise ValueError("distance field and free mask differ in size")
    keep = free & (dist >= min_clearance)
    anchor = keep & ridge_mask(dist)
    h, w = dist.shape
    img = np.zeros((h + 2, w + 2), dtype=np.uint8)
    img[1:-1, 1:-1] = keep
    anc = np.zeros_like(img, dtype=bool)
    anc[1:-1, 1:-1] = anchor
    dv = np.zeros((h + 2, w + 2), dtype=np.int64)
    dv[1:-1, 1:-1] = dist

    heap = [(int(dv[r, c]), r, c) for r, c in zip(*np.nonzero(img & ~anc))]
    heapq.heapify(heap)
    while heap:
        _, r, c = heapq.heappop(heap)
        if not img[r, c] or anc[r, c] or not _is_simple(img, r, c):
            continue
        img[r, c] = 0
        for dy, dx in _NEIGH8:
            rr, cc = r + dy, c + dx
            if img[rr, cc] and not anc[rr, cc]:
                heapq.heappush(heap, (int(dv[rr, cc]), rr, cc))

    changed = True
    while changed:
        changed = False
        blocks = img[:-1, :-1] & img[1:, :-1] & img[:-1, 1:] & img[1:, 1:]
        for r, c in zip(*np.nonzero(blocks)):
            cells = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
            if not all(img[p] for p in cells):
                continue
            for p in sorted(cells, key=lambda p: (dv[p], p)):
                if _is_simple(img, *p) and _n_neighbors(img, *p) > 1:
                    img[p] = 0
                    changed = True
                    break

    # staircase corners: 4-connected elbows that 8-connectivity makes redundant
    changed = True
    while changed:
        changed = False
        for _, r, c in sorted((dv[r, c], r, c) for r, c in zip(*np.nonzero(img))):
            if img[r, c] and _n_neighbors(img, r, c) > 1 and _is_simple(img, r, c):
                img[r, c] = 0
                changed = True
    return img[1:-1, 1:-1].astype(bool)


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    pixels: tuple  # interior chain, ordered from u to v; excludes the node pixels
    length: int


@dataclass
class RoadmapGraph:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)

    def __post_init__(self):
        self.node_id = {p: i for i, p in enumerate(self.nodes)}
        self.pixel_edge = {}
        for k, e in enumerate(self.edges):
            for i, p in enumerate(e.pixels):
                self.pixel_edge[p] = (k, i)

    def rasterize(self) -> set:
        out = set(self.nodes)
        for e in self.edges:
            out.update(e.pixels)
        return out

    def edge_polyline(self, k, reverse=False) -> list:
        """Full pixel path of edge ``k`` including both end nodes."""
        e = self.edges[k]
        path = [self.nodes[e.u], *e.pixels, self.nodes[e.v]]
        return path[::-1] if reverse else path

    def adjacency(self) -> dict:
        adj = {i: [] for i in range(len(self.nodes))}
        for k, e in enumerate(self.edges):
            adj[e.u].append((e.v, e.length, k))
            if e.v != e.u:
                adj[e.v].append((e.u, e.length, k))
        return adj


def skeleton_neighbors(skel) -> dict:
    """Pruned 8-adjacency: a diagonal link is dropped when a shared
    4-neighbour is also on the skeleton, so junction corners do not
    masquerade as extra branch points."""
    skel = np.asarray(skel, dtype=bool)
    h, w = skel.shape
    pix = set(zip(*map(np.ndarray.tolist, np.nonzero(skel))))
    nb = {}
    for r, c in sorted(pix):
        out = []
        for dy, dx in _NEIGH8:
            q = (r + dy, c + dx)
            if q not in pix:
                continue
            if dy and dx and ((r + dy, c) in pix or (r, c + dx) in pix):
                continue
            out.append(q)
        nb[(r, c)] = out
    return nb


def build_roadmap(skel) -> RoadmapGraph:
    nb = skeleton_neighbors(skel)
    nodes = sorted(p for p, q in nb.items() if len(q) != 2)
    is_node = set(nodes)
    used = set()  # directed first steps already walked
    seen = set(nodes)
    edges = []

    def walk(start, first, node_index):
        prev, cur = start, first
        chain = []
        length = step_weight(start, first)
        while cur not in is_node:
            chain.append(cur)
            seen.add(cur)
            nxt = nb[cur][0] if nb[cur][0] != prev else nb[cur][1]
            length += step_weight(cur, nxt)
            prev, cur = cur, nxt
        used.add((start, first))
        used.add((cur, prev))
        edges.append(Edge(node_index[start], node_index[cur], tuple(chain), length))

    index = {p: i for i, p in enumerate(nodes)}
    for u in nodes:
        for q in nb[u]:
            if (u, q) not in used:
                walk(u, q, index)

    # closed loops of degree-2 pixels get one synthetic node each
    for p in sorted(nb):
        if p in seen:
            continue
        nodes.append(p)
        is_node.add(p)
        seen.add(p)
        index[p] = len(nodes) - 1
        walk(p, nb[p][0], index)
    return RoadmapGraph(nodes, edges)


def obstacle_mask(labels, robot_mask=None) -> np.ndarray:
    """Non-background segments, minus the robot's own footprint."""
    obs = np.asarray(labels) > 0
    if robot_mask is not None and robot_mask.any():
        grown = robot_mask.copy()
        grown[1:, :] |= robot_mask[:-1, :]
        grown[:-1, :] |= robot_mask[1:, :]
        grown[:, 1:] |= robot_mask[:, :-1]
        grown[:, :-1] |= robot_mask[:, 1:]
        obs &= ~grown
    return obs


def locate_robot(mask):
    """Centroid cell of the foreground blob, or None if nothing moved."""
    pts = np.argwhere(mask)
    if len(pts) == 0:
        return None
    r, c = pts.mean(axis=0)
    return int(round(r)), int(round(c))


def field_to_pgm16(dist) -> np.ndarray:
    return np.clip(np.asarray(dist), 0, 65535).astype(np.uint16)
