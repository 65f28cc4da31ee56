"""Discrete-event simulation of the whole system.

The room controller samples the load cells, watches for get-up / lay-down
events, looks through the ceiling camera, plans and radios routes. The robot
controller drives the base and runs the nightstand; it radios back arrival
and door-closed notices.
"""

from __future__ import annotations

import enum
import heapq
import math
import os
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config, netlink, nightstand, posesense, vision
from .gridworld import (
    Bed,
    DriftParams,
    RobotState,
    RoomScene,
    load_map,
    render_topdown,
    standard_scene,
    step_robot,
)
from .pgm import write_pgm
from .planner import plan_on_grid, waypoints_to_commands

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class Phase(enum.Enum):
    Docked = "Docked"
    Approaching = "Approaching"
    AtBedside = "AtBedside"
    Retreating = "Retreating"


ALLOWED = {
    (Phase.Docked, Phase.Approaching),
    (Phase.Approaching, Phase.AtBedside),
    (Phase.AtBedside, Phase.Retreating),
    (Phase.Retreating, Phase.Docked),
    (Phase.Approaching, Phase.Retreating),
}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class TraceSegment:
    start: float
    end: float
    pose: posesense.PoseClass
    noise: float = 8.0


@dataclass
class ScenarioScript:
    duration: float
    trace: list
    inputs: list = field(default_factory=list)  # (t, nightstand input)
    link: netlink.LinkConfig = field(default_factory=netlink.LinkConfig)
    drift_sigma: float = 0.01
    seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        if not self.trace:
            raise ScenarioError("scenario needs at least one trace segment")
        t = 0.0
        for seg in self.trace:
            if abs(seg.start - t) > 1e-9 or seg.end <= seg.start:
                raise ScenarioError(f"trace segments must be contiguous and ordered; bad segment at {seg.start}")
            t = seg.end
        if t < self.duration - 1e-9:
            raise ScenarioError(f"trace ends at {t} s, before the scenario duration {self.duration} s")
        times = [t for t, _ in self.inputs]
        if times != sorted(times):
            raise ScenarioError("input events must be time-ordered")

    def pose_at(self, t):
        for seg in self.trace:
            if seg.start <= t < seg.end:
                return seg
        return self.trace[-1]


@dataclass(frozen=True)
class SimConfig:
    sensor_rate: float = config.SENSOR_RATE_HZ
    robot_rate: float = config.ROBOT_RATE_HZ
    debounce_n: int = config.DEBOUNCE_N
    render_sigma: float = 2.0
    train_seed: int = 1234
    heartbeat_period: float = 0.0  # seconds; 0 disables
    nightstand: nightstand.NightstandConfig = nightstand.NightstandConfig()
    v_max: float = config.V_MAX
    w_max: float = config.W_MAX


class EventLog:
    """Append-only list of ``(t, category, detail)`` records."""

    def __init__(self, records=None):
        self.records = list(records or [])

    def add(self, t, category, detail=""):
        if self.records and t < self.records[-1][0]:
            raise RuntimeError(f"log time went backwards: {t} < {self.records[-1][0]}")
        self.records.append((t, category, detail))

    def to_text(self) -> str:
        return "".join(f"{t:.4f}\t{cat}\t{detail}\n" for t, cat, detail in self.records)

    @classmethod
    def from_text(cls, text: str):
        recs = []
        for line in text.splitlines():
            if not line:
                continue
            t, cat, detail = line.split("\t", 2)
            recs.append((float(t), cat, detail))
        return cls(recs)

    def where(self, category):
        return [r for r in self.records if r[1] == category]

    def __len__(self):
        return len(self.records)


def fields(detail: str) -> dict:
    """Parse ``key=value`` pairs from a log detail string."""
    out = {}
    for tok in detail.split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            out[k] = v
    return out


def bedside_approach_point(scene: RoomScene):
    """Free cell beside the bed's interior long side, clear of the bed by the robot radius.

    Among cells at the smallest admissible offset, the one nearest the dock
    wins; remaining ties go to the lowest (row, col).
    """
    bed = scene.bed
    if bed is None:
        raise ValueError("scene has no bed")
    blocked = scene.map.obstacles | bed.mask(scene.map.obstacles.shape)
    field_ = vision.chamfer_transform(blocked)
    need = vision.default_min_clearance(scene.radius_cells)
    mid = scene.map.width / 2
    west = abs((bed.c0 - 0.5) - mid) <= abs((bed.c1 - 0.5) - mid)
    dock = scene.dock or (scene.map.height // 2, scene.map.width // 2)
    for k in range(1, scene.map.width):
        c = bed.c0 - k if west else bed.c1 - 1 + k
        if not 0 <= c < scene.map.width:
            break
        cands = [(r, c) for r in range(bed.r0, bed.r1) if not blocked[r, c] and field_[r, c] >= need]
        if cands:
            return min(cands, key=lambda p: ((p[0] - dock[0]) ** 2 + (p[1] - dock[1]) ** 2, p))
    raise ValueError("no admissible approach point beside the bed")


class Simulation:
    # same-time ordering: radio deliveries, then sensors, nightstand inputs, robot
    P_DELIVER, P_SENSOR, P_INPUT, P_ROBOT, P_HEARTBEAT = range(5)

    def __init__(self, scene: RoomScene, script: ScenarioScript, cfg: SimConfig = SimConfig(), seed=None, frames_dir=None):
        if scene.robot is None or scene.bed is None or scene.dock is None:
            raise ScenarioError("scene needs a robot, a bed and a dock")
        self.scene = scene
        self.script = script
        self.cfg = cfg
        self.seed = script.seed if seed is None else seed
        self.frames_dir = frames_dir
        self.log = EventLog()
        self.queue = []
        self._n = 0

        self.rng_sensor = np.random.default_rng([self.seed, 1])
        self.rng_drift = np.random.default_rng([self.seed, 2])
        self.rng_link = np.random.default_rng([self.seed, 3])

        train = []
        for k, pose in enumerate(posesense.PoseClass):
            samples = posesense.generate_synthetic(pose, 15.0, cfg.sensor_rate, 8.0, seed=[cfg.train_seed, k])
            train += [(s, pose) for s in samples]
        self.model = posesense.train_bayes(train)
        self.detector = posesense.TransitionDetector(cfg.debounce_n)

        self.phase = Phase.Docked
        self.robot = scene.robot
        self.commands = deque()
        self.purpose = None
        self.pending_route = None
        self.stand = nightstand.NightstandState.initial(cfg.nightstand)
        self.stand_t = 0.0
        self.roll = 0.0
        self.lift = 0
        self.triggers = 0
        self.room_tx, self.robot_tx = netlink.Sender(), netlink.Sender()
        self.room_rx, self.robot_rx = netlink.Receiver(), netlink.Receiver()
        self.approach = bedside_approach_point(scene)
        self.background = render_topdown(scene.with_robot(None), cfg.render_sigma, seed=[self.seed, 4])

    # scheduling

    def at(self, t, prio, fn, *args):
        heapq.heappush(self.queue, (t, prio, self._n, fn, args))
        self._n += 1

    def run(self) -> EventLog:
        dur = self.script.duration
        self.log.add(0.0, "start", f"seed={self.seed} approach={self.approach[0]},{self.approach[1]} dock={self.scene.dock[0]},{self.scene.dock[1]}")
        n = int(math.floor(dur * self.cfg.sensor_rate + 1e-9))
        for k in range(n + 1):
            self.at(k / self.cfg.sensor_rate, self.P_SENSOR, self.sensor_tick)
        n = int(math.floor(dur * self.cfg.robot_rate + 1e-9))
        for k in range(1, n + 1):
            self.at(k / self.cfg.robot_rate, self.P_ROBOT, self.robot_tick)
        for t, ev in self.script.inputs:
            self.at(t, self.P_INPUT, self.user_input, ev)
        if self.cfg.heartbeat_period > 0:
            k = 1
            while k * self.cfg.heartbeat_period <= dur:
                self.at(k * self.cfg.heartbeat_period, self.P_HEARTBEAT, self.transmit, "robot", netlink.Heartbeat())
                k += 1
        while self.queue:
            t, _, _, fn, args = heapq.heappop(self.queue)
            if t > dur + 1e-9:
                break
            self.now = t
            fn(*args)
        self.log.add(self.now, "end", f"phase={self.phase.value} {self._pose_detail()}")
        return self.log

    # room side

    def sensor_tick(self):
        seg = self.script.pose_at(self.now)
        base = np.array(posesense.NOMINAL_LBF[seg.pose])
        f = base + self.rng_sensor.normal(0.0, seg.noise, 4) if seg.noise > 0 else base
        sample = posesense.LoadSample(self.now, tuple(f))
        pose, _ = posesense.classify_bayes(self.model, sample)
        self.log.add(self.now, "pose", f"class={pose.value} f={','.join(f'{v:.1f}' for v in sample.f)}")
        ev = self.detector.update(pose, self.now)
        if ev is None:
            return
        self.log.add(self.now, "pose_event", f"kind={ev.kind.value}")
        if ev.kind is posesense.EventKind.GotUp and self.phase is Phase.Docked:
            self.dispatch(Phase.Approaching, self.approach, netlink.NavigateTo, ev)
        elif ev.kind is posesense.EventKind.LayDown and self.phase in (Phase.Approaching, Phase.AtBedside):
            self.dispatch(Phase.Retreating, self.scene.dock, netlink.Retreat, ev)

    def dispatch(self, phase, goal, kind, trigger):
        """Look, plan, and radio a route to the robot."""
        self.triggers += 1
        try:
            plan = self.plan_from_camera(goal)
        except ValueError as e:  # PlanError, or a frame with nothing to plan around
            self.log.add(self.now, "failure", f"trigger={self._trigger_name(trigger)} reason={str(e).replace(' ', '_')}")
            return
        self.set_phase(phase)
        self.log.add(self.now, "plan", f"trigger={self._trigger_name(trigger)} goal={goal[0]},{goal[1]} waypoints={len(plan.waypoints)} length={plan.total_length}")
        if isinstance(trigger, posesense.PoseEvent):
            self.transmit("room", netlink.PersonEvent(netlink.PersonKind[trigger.kind.value], int(round(self.now * 1000))))
        self.transmit("room", kind(plan.waypoints))

    @staticmethod
    def _trigger_name(trigger):
        if isinstance(trigger, posesense.PoseEvent):
            return trigger.kind.value
        return type(trigger).__name__

    def plan_from_camera(self, goal):
        frame = render_topdown(self.scene.with_robot(self.robot), self.cfg.render_sigma, seed=[self.seed, 5, self.triggers])
        if self.frames_dir is not None:
            Path(self.frames_dir).mkdir(parents=True, exist_ok=True)
            name = os.path.join(self.frames_dir, f"frame_{self.triggers:03d}.pgm")
            with open(name, "wb") as fh:
                fh.write(write_pgm(frame))
        moving = vision.background_subtract(frame, self.background)
        start = vision.locate_robot(moving)
        if start is None:
            raise PlanError("robot not visible to the camera")
        labels = vision.mean_shift_segment(frame)
        obstacles = vision.obstacle_mask(labels, moving)
        min_clear = vision.default_min_clearance(self.scene.radius_cells)
        self.log.add(self.now, "vision", f"robot={start[0]},{start[1]} obstacle_px={int(obstacles.sum())}")
        return plan_on_grid(obstacles, start, goal, min_clear, now=self.now)

    def room_receive(self, data):
        msg = self.room_rx.accept(data)
        if msg is None:
            return
        if isinstance(msg, netlink.DoorClosed) and self.phase is Phase.AtBedside:
            self.dispatch(Phase.Retreating, self.scene.dock, netlink.Retreat, msg)
        elif isinstance(msg, netlink.ArrivedAt):
            self.log.add(self.now, "arrived_msg", f"cell={msg.cell[0]},{msg.cell[1]}")

    # radio

    def transmit(self, side, msg):
        sender = self.room_tx if side == "room" else self.robot_tx
        handler = self.robot_receive if side == "room" else self.room_receive
        direction = "room>robot" if side == "room" else "robot>room"
        for data in sender.frames(msg):
            seq = int.from_bytes(data[1:3], "big")
            self.log.add(self.now, "frame_sent", f"dir={direction} type={type(msg).__name__} seq={seq} bytes={data.hex()}")
            fate = netlink.send(self.script.link, data, self.now * 1000.0, self.rng_link)
            if isinstance(fate, netlink.Dropped):
                self.log.add(self.now, "frame_dropped", f"dir={direction} seq={seq} reason={fate.reason.replace(' ', '_')}")
            else:
                self.at(fate.at / 1000.0, self.P_DELIVER, self._deliver, direction, seq, data, handler)

    def _deliver(self, direction, seq, data, handler):
        self.log.add(self.now, "frame_delivered", f"dir={direction} seq={seq}")
        handler(data)

    # robot side

    def robot_receive(self, data):
        msg = self.robot_rx.accept(data)
        if msg is None:
            return
        if isinstance(msg, netlink.NavigateTo) and self.phase is Phase.Approaching:
            self.pending_route = ("approach", msg.waypoints)
        elif isinstance(msg, netlink.Retreat) and self.phase is Phase.Retreating:
            self.pending_route = ("retreat", msg.waypoints)
        elif isinstance(msg, netlink.PersonEvent):
            self.log.add(self.now, "person_msg", f"kind={msg.kind.name} t_ms={msg.t_ms}")

    def robot_tick(self):
        dt = 1.0 / self.cfg.robot_rate
        self.advance_nightstand()
        if self.pending_route is not None:
            self.purpose, pts = self.pending_route
            self.pending_route = None
            cmds = waypoints_to_commands(pts, self.robot, self.scene.map.resolution, self.cfg.v_max, self.cfg.w_max)
            self.commands = deque([list(c) for c in cmds])
            self.log.add(self.now, "motion_start", f"purpose={self.purpose} commands={len(cmds)}")
            if not self.commands:
                self.finish_route()
                return
        if not self.commands:
            return
        left = dt
        drift = DriftParams(self.script.drift_sigma)
        while left > 1e-12 and self.commands:
            cmd = self.commands[0]
            step = min(left, cmd[2])
            self.robot = step_robot(self.robot, (cmd[0], cmd[1]), step, drift, self.rng_drift, self.scene.map, self.cfg.v_max, self.cfg.w_max)
            if self.robot.collided:
                self.log.add(self.now, "collision", self._pose_detail())
            cmd[2] -= step
            left -= step
            if cmd[2] <= 1e-12:
                self.commands.popleft()
        self.log.add(self.now, "robot", self._pose_detail())
        if not self.commands:
            self.finish_route()

    def finish_route(self):
        res = self.scene.map.resolution
        if self.purpose == "approach":
            self.set_phase(Phase.AtBedside)
            goal = self.approach
        else:
            self.set_phase(Phase.Docked)
            goal = self.scene.dock
        gx, gy = self.scene.map.center_of(goal)
        err = math.hypot(self.robot.x - gx, self.robot.y - gy) / res
        self.log.add(self.now, "arrival", f"purpose={self.purpose} goal={goal[0]},{goal[1]} error_cells={err:.4f}")
        if self.purpose == "approach":
            cell = self.scene.map.cell_of(self.robot.x_hat, self.robot.y_hat)
            self.transmit("robot", netlink.ArrivedAt(cell))
        self.purpose = None

    def advance_nightstand(self, ev=None):
        dt = self.now - self.stand_t
        self.stand_t = self.now
        if ev is None:
            if self.roll:
                ev = nightstand.Tilt(self.roll)
            elif self.lift:
                ev = nightstand.LiftCmd(self.lift > 0)
            else:
                ev = nightstand.Tick()
        before = self.stand
        self.stand, _ = nightstand.handle_input(self.stand, ev, dt, self.cfg.nightstand)
        s = self.stand
        if s.door != before.door:
            self.log.add(self.now, "nightstand", f"door={s.door.value}")
        if s.active_tray != before.active_tray:
            self.log.add(self.now, "nightstand", f"tray={s.active_tray}")
        if nightstand.is_put_away(s) and not nightstand.is_put_away(before) and self.phase is Phase.AtBedside:
            self.transmit("robot", netlink.DoorClosed(int(round(self.now * 1000))))

    def user_input(self, ev):
        self.log.add(self.now, "input", type(ev).__name__ + "".join(f" {k}={v}" for k, v in vars(ev).items()))
        if isinstance(ev, nightstand.Tilt):
            self.advance_nightstand()
            self.roll = ev.roll
        elif isinstance(ev, nightstand.LiftCmd):
            self.advance_nightstand()
            self.lift = 1 if ev.up else -1
        elif isinstance(ev, LiftStop):
            self.advance_nightstand()
            self.lift = 0
        else:
            self.advance_nightstand(ev)

    # bookkeeping

    def set_phase(self, new):
        if (self.phase, new) not in ALLOWED:
            raise RuntimeError(f"illegal phase change {self.phase.value} -> {new.value}")
        self.log.add(self.now, "phase", f"from={self.phase.value} to={new.value}")
        self.phase = new

    def _pose_detail(self):
        r = self.robot
        return f"x={r.x:.4f} y={r.y:.4f} th={r.theta:.4f} xh={r.x_hat:.4f} yh={r.y_hat:.4f} thh={r.theta_hat:.4f}"


@dataclass(frozen=True)
class LiftStop:
    """Scenario-level event releasing a held lift command."""


def run_scenario(scene: RoomScene, script: ScenarioScript, cfg: SimConfig = SimConfig(), seed=None, frames_dir=None) -> EventLog:
    return Simulation(scene, script, cfg, seed, frames_dir).run()


# scenario files


def _input_event(entry):
    kind = str(entry.get("event", "")).lower()
    if kind == "lift" and str(entry.get("value", "")).lower() == "stop":
        return LiftStop()
    args = () if "value" not in entry else (entry["value"],)
    try:
        return nightstand.parse_input(kind, *args)
    except (IndexError, ValueError, TypeError) as e:
        raise ScenarioError(f"bad input entry {entry!r}: {e}") from None


def parse_scenario(text: str, base_dir="."):
    """Parse a TOML scenario; returns ``(scene, script, expectations)``."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f"scenario is not valid TOML: {e}") from None
    known = {"duration", "seed", "scene", "link", "robot", "trace", "inputs", "expect"}
    extra = set(doc) - known
    if extra:
        raise ScenarioError(f"unknown scenario keys: {', '.join(sorted(extra))}")
    for section, allowed in (("trace", {"start", "end", "pose", "noise"}), ("inputs", {"t", "event", "value"})):
        for entry in doc.get(section, []):
            if not isinstance(entry, dict):
                raise ScenarioError(f"[[{section}]] entries must be tables")
            extra = set(entry) - allowed
            if extra:
                raise ScenarioError(f"unknown key(s) in [[{section}]]: {', '.join(sorted(extra))}")
    try:
        duration = float(doc["duration"])
        trace = [
            TraceSegment(float(s["start"]), float(s["end"]), posesense.PoseClass(s["pose"]), float(s.get("noise", 8.0)))
            for s in doc.get("trace", [])
        ]
        inputs = [(float(e["t"]), _input_event(e)) for e in doc.get("inputs", [])]
        link = netlink.LinkConfig(**doc.get("link", {}))
        robot = doc.get("robot", {})
        script = ScenarioScript(
            duration,
            trace,
            inputs,
            link,
            drift_sigma=float(robot.get("drift_sigma", 0.01)),
            seed=int(doc.get("seed", config.DEFAULT_SEED)),
        )
    except KeyError as e:
        raise ScenarioError(f"missing scenario field {e}") from None
    except (TypeError, ValueError) as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(str(e)) from None

    sc = doc.get("scene", {"preset": "standard"})
    if sc.get("preset", None) == "standard":
        scene = standard_scene()
    elif "map" in sc:
        with open(os.path.join(base_dir, sc["map"]), "rb") as fh:
            grid = load_map(fh.read())
        try:
            bed = Bed(*sc["bed"])
            dock = tuple(sc["dock"])
        except (KeyError, TypeError) as e:
            raise ScenarioError(f"scene with a map needs bed=[r0,c0,r1,c1] and dock=[r,c]: {e}") from None
        x, y = grid.center_of(dock)
        scene = RoomScene(grid, RobotState(x, y, 0.0), bed=bed, dock=dock, person_present=True)
    else:
        raise ScenarioError("scene must give preset = \"standard\" or a map file")
    expect = doc.get("expect", {})
    if not isinstance(expect, dict):
        raise ScenarioError("[expect] must be a table")
    return scene, script, expect


def load_scenario(path):
    path = Path(path)
    return parse_scenario(path.read_text(), base_dir=path.parent)


# assertions over logs


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def phase_sequence(log: EventLog):
    seq = [Phase.Docked.value]
    for _, _, d in log.where("phase"):
        seq.append(fields(d)["to"])
    return seq


def check_assertions(log: EventLog, expectations: dict):
    """Evaluate declarative expectations against a finished log.

    Supported keys: ``phase_sequence`` (list of phase names, starting from
    Docked), ``final_phase``, ``arrival_tolerance_cells`` (every bedside
    arrival must be within this many cells of the approach point; at least
    one must exist), ``arrival_purposes`` (which arrivals must be present), and
    ``max_latency_ms`` (GotUp event to the robot's first motion).
    """
    known = {"phase_sequence", "final_phase", "arrival_tolerance_cells", "arrival_purposes", "max_latency_ms"}
    if not isinstance(expectations, dict):
        raise ValueError("expectations must be a mapping")
    bad = set(expectations) - known
    if bad:
        raise ValueError(f"unknown expectation(s): {', '.join(sorted(bad))}")
    out = []
    seq = phase_sequence(log)
    if "phase_sequence" in expectations:
        want = list(expectations["phase_sequence"])
        if not all(isinstance(p, str) and p in Phase.__members__ for p in want):
            raise ValueError(f"phase_sequence holds unknown phases: {want}")
        out.append(CheckResult("phase_sequence", seq == want, f"observed {'>'.join(seq)}"))
    if "final_phase" in expectations:
        want = expectations["final_phase"]
        if want not in Phase.__members__:
            raise ValueError(f"unknown phase {want!r}")
        out.append(CheckResult("final_phase", seq[-1] == want, f"observed {seq[-1]}"))
    if "arrival_tolerance_cells" in expectations or "arrival_purposes" in expectations:
        tol = float(expectations.get("arrival_tolerance_cells", math.inf))
        purposes = list(expectations.get("arrival_purposes", ["approach"]))
        arrivals = [fields(d) for _, _, d in log.where("arrival")]
        seen = {a["purpose"] for a in arrivals}
        # tolerance is judged at the bedside; the dock is reached on odometry alone
        worst = max((float(a["error_cells"]) for a in arrivals if a["purpose"] == "approach"), default=math.inf)
        ok = all(p in seen for p in purposes) and worst <= tol
        out.append(CheckResult("arrival", ok, f"purposes={sorted(seen)} worst_error_cells={worst:.4f} tolerance={tol}"))
    if "max_latency_ms" in expectations:
        limit = float(expectations["max_latency_ms"])
        got = [t for t, _, d in log.where("pose_event") if fields(d)["kind"] == "GotUp"]
        moves = [t for t, _, _ in log.where("motion_start")]
        if not got or not moves or moves[0] < got[0]:
            out.append(CheckResult("latency", False, "no GotUp event followed by motion"))
        else:
            lat = (moves[0] - got[0]) * 1000.0
            out.append(CheckResult("latency", lat <= limit, f"latency_ms={lat:.1f} limit={limit}"))
    return out
