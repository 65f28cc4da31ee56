"""Room model: occupancy grid, robot kinematics and the overhead camera.

Cells are addressed as ``(row, col)``. World coordinates put the centre of
cell ``(r, c)`` at ``x = (c + 0.5) * resolution``, ``y = (r + 0.5) * resolution``,
so ``y`` grows with the row index and headings are measured in that frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import config
from .pgm import PGMError, read_pgm, write_pgm


class MapFormatError(PGMError):
    pass


class CommandLimitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridMap:
    """Occupancy grid; ``obstacles[r, c]`` is True for blocked cells."""

    obstacles: np.ndarray
    resolution: float = config.RESOLUTION_M

    def __post_init__(self):
        obs = np.array(self.obstacles, dtype=bool)
        obs.setflags(write=False)
        object.__setattr__(self, "obstacles", obs)
        if obs.ndim != 2:
            raise ValueError("occupancy grid must be 2-D")
        h, w = obs.shape
        if w < 8 or h < 8:
            raise ValueError(f"map must be at least 8x8 cells, got {w}x{h}")
        if not (math.isfinite(self.resolution) and self.resolution > 0):
            raise ValueError(f"resolution must be finite and positive, got {self.resolution}")

    @property
    def width(self) -> int:
        return self.obstacles.shape[1]

    @property
    def height(self) -> int:
        return self.obstacles.shape[0]

    @property
    def free(self) -> np.ndarray:
        return ~self.obstacles

    @property
    def walled(self) -> bool:
        o = self.obstacles
        return bool(o[0].all() and o[-1].all() and o[:, 0].all() and o[:, -1].all())

    def in_bounds(self, r: int, c: int) -> bool:
        return 0 <= r < self.height and 0 <= c < self.width

    def is_free(self, r: int, c: int) -> bool:
        return self.in_bounds(r, c) and not self.obstacles[r, c]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(y / self.resolution)), int(math.floor(x / self.resolution))

    def center_of(self, cell) -> tuple[float, float]:
        r, c = cell
        return (c + 0.5) * self.resolution, (r + 0.5) * self.resolution

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return self.resolution == other.resolution and np.array_equal(self.obstacles, other.obstacles)

    __hash__ = None


def empty_room(width: int, height: int, resolution: float = config.RESOLUTION_M) -> GridMap:
    obs = np.zeros((height, width), dtype=bool)
    obs[0, :] = obs[-1, :] = obs[:, 0] = obs[:, -1] = True
    return GridMap(obs, resolution)


def with_boxes(grid: GridMap, boxes) -> GridMap:
    """Return a copy of ``grid`` with half-open boxes ``(r0, c0, r1, c1)`` blocked."""
    obs = grid.obstacles.copy()
    for r0, c0, r1, c1 in boxes:
        obs[r0:r1, c0:c1] = True
    return GridMap(obs, grid.resolution)


@dataclass(frozen=True)
class DriftParams:
    """Multiplicative wheel-slip noise: each wheel's displacement is scaled by ``1 + N(0, slip_sigma)``."""

    slip_sigma: float = 0.0
    track_width: float = config.TRACK_WIDTH_M


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float = 0.0
    v: float = 0.0
    omega: float = 0.0
    x_hat: float | None = None
    y_hat: float | None = None
    theta_hat: float | None = None
    collided: bool = False

    def __post_init__(self):
        # odometry starts out agreeing with the true pose
        if self.x_hat is None:
            object.__setattr__(self, "x_hat", self.x)
        if self.y_hat is None:
            object.__setattr__(self, "y_hat", self.y)
        if self.theta_hat is None:
            object.__setattr__(self, "theta_hat", self.theta)

    @property
    def pose(self):
        return self.x, self.y, self.theta

    @property
    def odometry(self):
        return self.x_hat, self.y_hat, self.theta_hat

    def odometry_error(self) -> float:
        return math.hypot(self.x - self.x_hat, self.y - self.y_hat)


@dataclass(frozen=True)
class Bed:
    """Half-open cell box ``[r0, r1) x [c0, c1)``; the long side runs along rows."""

    r0: int
    c0: int
    r1: int
    c1: int

    @property
    def legs(self):
        return ((self.r0, self.c0), (self.r0, self.c1 - 1), (self.r1 - 1, self.c0), (self.r1 - 1, self.c1 - 1))

    def mask(self, shape) -> np.ndarray:
        m = np.zeros(shape, dtype=bool)
        m[self.r0 : self.r1, self.c0 : self.c1] = True
        return m


@dataclass(frozen=True)
class RoomScene:
    map: GridMap
    robot: RobotState | None = None
    robot_radius: float = config.ROBOT_RADIUS_M
    bed: Bed | None = None
    dock: tuple[int, int] | None = None
    person_present: bool = False

    def __post_init__(self):
        if not self.robot_radius > 0:
            raise ValueError("robot radius must be positive")
        if self.bed is not None:
            b = self.bed
            if not (0 <= b.r0 < b.r1 <= self.map.height and 0 <= b.c0 < b.c1 <= self.map.width):
                raise ValueError("bed lies outside the map")
            if self.map.obstacles[b.r0 : b.r1, b.c0 : b.c1].any():
                raise ValueError("bed must lie on free cells")
        if self.dock is not None and not self.map.is_free(*self.dock):
            raise ValueError(f"dock {self.dock} is not a free cell")

    @property
    def radius_cells(self) -> float:
        return self.robot_radius / self.map.resolution

    def person_mask(self) -> np.ndarray:
        if self.bed is None or not self.person_present:
            return np.zeros(self.map.obstacles.shape, dtype=bool)
        return self.bed.mask(self.map.obstacles.shape)

    def robot_mask(self) -> np.ndarray:
        """Cells whose centre lies inside the robot's footprint disc."""
        h, w = self.map.obstacles.shape
        if self.robot is None:
            return np.zeros((h, w), dtype=bool)
        res = self.map.resolution
        cy = (np.arange(h) + 0.5) * res
        cx = (np.arange(w) + 0.5) * res
        d2 = (cy[:, None] - self.robot.y) ** 2 + (cx[None, :] - self.robot.x) ** 2
        return d2 <= self.robot_radius**2 + 1e-12

    def with_robot(self, robot: RobotState | None) -> RoomScene:
        return replace(self, robot=robot)


def standard_scene(robot_at_dock: bool = True) -> RoomScene:
    """6 m x 6 m bedroom: bed against the east wall, a table, chair and dresser."""
    n = int(round(config.ROOM_SIZE_M / config.RESOLUTION_M))
    room = with_boxes(
        empty_room(n, n),
        [
            (28, 22, 37, 33),  # table
            (10, 12, 15, 17),  # chair
            (53, 30, 59, 44),  # dresser against the south wall
        ],
    )
    bed = Bed(6, 44, 26, 56)
    dock = (48, 8)
    robot = None
    if robot_at_dock:
        x, y = room.center_of(dock)
        robot = RobotState(x, y, 0.0)
    return RoomScene(room, robot=robot, bed=bed, dock=dock, person_present=True)


def render_topdown(scene: RoomScene, noise_sigma: float = 0.0, seed=0) -> np.ndarray:
    """Synthetic ceiling-camera frame (uint8, one pixel per map cell)."""
    frame = np.where(scene.map.obstacles, config.OBSTACLE_LEVEL, config.FREE_LEVEL).astype(float)
    frame[scene.person_mask()] = config.PERSON_LEVEL
    frame[scene.robot_mask()] = config.ROBOT_LEVEL
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        frame += rng.normal(0.0, noise_sigma, size=frame.shape)
    return np.clip(np.rint(frame), 0, 255).astype(np.uint8)


def _wrap(theta: float) -> float:
    if -math.pi <= theta < math.pi:
        return theta
    return (theta + math.pi) % (2 * math.pi) - math.pi


def _advance(x, y, theta, ds, dtheta):
    if abs(dtheta) < 1e-12:
        return x + ds * math.cos(theta), y + ds * math.sin(theta), theta + dtheta
    r = ds / dtheta
    th = theta + dtheta
    return x + r * (math.sin(th) - math.sin(theta)), y - r * (math.cos(th) - math.cos(theta)), th


def _blocked(grid: GridMap, x0, y0, x1, y1) -> bool:
    n = max(1, int(math.ceil(math.hypot(x1 - x0, y1 - y0) / (0.5 * grid.resolution))))
    for i in range(1, n + 1):
        f = i / n
        r, c = grid.cell_of(x0 + f * (x1 - x0), y0 + f * (y1 - y0))
        if not grid.is_free(r, c):
            return True
    return False


def step_robot(
    state: RobotState,
    cmd,
    dt: float,
    drift: DriftParams = DriftParams(),
    seed=None,
    grid: GridMap | None = None,
    v_max: float = config.V_MAX,
    w_max: float = config.W_MAX,
) -> RobotState:
    """Advance the robot by one unicycle step.

    The true pose follows the command exactly. The odometry estimate sees the
    same wheel displacements perturbed by multiplicative slip noise. ``seed``
    may be an int or a ``numpy.random.Generator``. If ``grid`` is given and
    the motion would end in (or pass through) an obstacle, both poses stay
    put and ``collided`` is set.
    """
    v, w = cmd
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if abs(v) > v_max + 1e-12 or abs(w) > w_max + 1e-12:
        raise CommandLimitError(f"command (v={v}, w={w}) exceeds limits (v_max={v_max}, w_max={w_max})")

    ds = v * dt
    dth = w * dt
    ds_hat, dth_hat = ds, dth
    if drift.slip_sigma > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        nl, nr = rng.normal(0.0, drift.slip_sigma, size=2)
        b = drift.track_width
        dl = ds - 0.5 * b * dth
        dr = ds + 0.5 * b * dth
        ds_hat = ds + 0.5 * (dl * nl + dr * nr)
        dth_hat = dth + (dr * nr - dl * nl) / b

    x, y, th = _advance(state.x, state.y, state.theta, ds, dth)
    if grid is not None and ds != 0 and _blocked(grid, state.x, state.y, x, y):
        return replace(state, v=v, omega=w, collided=True)
    xh, yh, thh = _advance(state.x_hat, state.y_hat, state.theta_hat, ds_hat, dth_hat)
    return RobotState(x, y, _wrap(th), v, w, xh, yh, _wrap(thh), False)


def save_map(grid: GridMap) -> bytes:
    pixels = np.where(grid.obstacles, 0, 255).astype(np.uint8)
    return write_pgm(pixels, 255, comments=[f"resolution {grid.resolution!r}"])


def load_map(data: bytes) -> GridMap:
    try:
        pixels, maxval, comments = read_pgm(data)
    except MapFormatError:
        raise
    except PGMError as e:
        raise MapFormatError(str(e)) from None
    if maxval != 255:
        raise MapFormatError(f"map maxval must be 255, got {maxval}")
    bad = (pixels != 0) & (pixels != 255)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise MapFormatError(f"map pixel ({r}, {c}) has value {pixels[r, c]}; only 0 and 255 allowed")
    resolution = config.RESOLUTION_M
    for c in comments:
        parts = c.split()
        if len(parts) == 2 and parts[0] == "resolution":
            try:
                resolution = float(parts[1])
            except ValueError:
                raise MapFormatError(f"bad resolution comment {c!r}") from None
    try:
        return GridMap(pixels == 0, resolution)
    except ValueError as e:
        raise MapFormatError(str(e)) from None
