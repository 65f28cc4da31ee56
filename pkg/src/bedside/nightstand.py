"""Nightstand controller: rotating trays, tray selection, IR-toggled door, lift."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from . import config


class Door(enum.Enum):
    Open = "Open"
    Closed = "Closed"
    Opening = "Opening"
    Closing = "Closing"


SETTLED = (Door.Open, Door.Closed)


@dataclass(frozen=True)
class NightstandConfig:
    n_trays: int = config.N_TRAYS
    tilt_deadband: float = config.TILT_DEADBAND_DEG
    tray_rate: float = config.TRAY_RATE_DEG_S
    door_time: float = config.DOOR_TIME_S
    ir_threshold: float = config.IR_THRESHOLD_CM
    ir_hysteresis: float = config.IR_HYSTERESIS_CM
    ir_refractory: float = config.IR_REFRACTORY_S
    lift_rate: float = config.LIFT_RATE_MM_S
    lift_max: float = config.LIFT_MAX_MM


# input events


@dataclass(frozen=True)
class Tilt:
    roll: float  # degrees, negative = tilted left


@dataclass(frozen=True)
class ButtonZ:
    pass


@dataclass(frozen=True)
class ButtonC:
    pass


@dataclass(frozen=True)
class IrReading:
    distance: float  # cm


@dataclass(frozen=True)
class LiftCmd:
    up: bool


@dataclass(frozen=True)
class Tick:
    """Lets time pass with no user input."""


@dataclass(frozen=True)
class ServoCommand:
    actuator: str  # "tray", "door" or "lift"
    index: int
    value: float


@dataclass(frozen=True)
class NightstandState:
    door: Door = Door.Closed
    door_progress: float = 1.0
    active_tray: int = 0
    tray_angles: tuple = (0.0,) * config.N_TRAYS
    lift_height: float = 0.0
    ir_armed: bool = True
    since_toggle: float = float("inf")

    @classmethod
    def initial(cls, cfg: NightstandConfig = NightstandConfig()):
        return cls(tray_angles=(0.0,) * cfg.n_trays)


def is_put_away(state: NightstandState) -> bool:
    return state.door is Door.Closed


def _advance_door(state, dt, cfg):
    if state.door in SETTLED:
        return state
    progress = min(1.0, state.door_progress + dt / cfg.door_time)
    if progress >= 1.0 - 1e-9:
        return replace(state, door=Door.Open if state.door is Door.Opening else Door.Closed, door_progress=1.0)
    return replace(state, door_progress=progress)


def handle_input(state: NightstandState, ev, dt: float = 0.0, cfg: NightstandConfig = NightstandConfig()):
    """Apply ``ev`` after ``dt`` seconds have elapsed; returns ``(state, servo_commands)``.

    Timers (door travel, IR refractory) advance first. A tilt is held for
    the whole ``dt``.
    """
    dt = max(0.0, float(dt))
    before = state
    s = replace(state, since_toggle=state.since_toggle + dt)
    s = _advance_door(s, dt, cfg)
    n = len(s.tray_angles)

    if isinstance(ev, Tilt):
        roll = min(90.0, max(-90.0, ev.roll))
        if abs(roll) > cfg.tilt_deadband:
            # tilting left turns the tray clockwise seen from above (increasing angle)
            delta = cfg.tray_rate * dt * (1.0 if roll < 0 else -1.0)
            angles = list(s.tray_angles)
            a = (angles[s.active_tray] + delta) % 360.0
            # a tiny negative angle rounds up to exactly 360.0
            angles[s.active_tray] = 0.0 if a >= 360.0 else a
            s = replace(s, tray_angles=tuple(angles))
    elif isinstance(ev, ButtonZ):
        s = replace(s, active_tray=(s.active_tray + 1) % n)
    elif isinstance(ev, ButtonC):
        s = replace(s, active_tray=(s.active_tray - 1) % n)
    elif isinstance(ev, IrReading):
        d = max(0.0, ev.distance)
        if d > cfg.ir_threshold + cfg.ir_hysteresis:
            s = replace(s, ir_armed=True)
        elif d < cfg.ir_threshold and s.ir_armed and s.door in SETTLED and s.since_toggle >= cfg.ir_refractory:
            nxt = Door.Closing if s.door is Door.Open else Door.Opening
            s = replace(s, door=nxt, door_progress=0.0, ir_armed=False, since_toggle=0.0)
    elif isinstance(ev, LiftCmd):
        step = cfg.lift_rate * dt * (1.0 if ev.up else -1.0)
        s = replace(s, lift_height=min(cfg.lift_max, max(0.0, s.lift_height + step)))
    elif not isinstance(ev, Tick):
        raise TypeError(f"unsupported nightstand input {ev!r}")

    cmds = []
    for i, (a, b) in enumerate(zip(before.tray_angles, s.tray_angles)):
        if a != b:
            cmds.append(ServoCommand("tray", i, b))
    if (s.door, s.door_progress) != (before.door, before.door_progress):
        opened = s.door_progress if s.door in (Door.Opening, Door.Open) else 1.0 - s.door_progress
        cmds.append(ServoCommand("door", 0, opened))
    if s.lift_height != before.lift_height:
        cmds.append(ServoCommand("lift", 0, s.lift_height))
    return s, cmds


def parse_input(kind: str, *args):
    """Build an input event from a short textual form, e.g. ``("tilt", -30)``."""
    kind = kind.lower()
    if kind == "tilt":
        return Tilt(float(args[0]))
    if kind in ("z", "buttonz"):
        return ButtonZ()
    if kind in ("c", "buttonc"):
        return ButtonC()
    if kind == "ir":
        return IrReading(float(args[0]))
    if kind == "lift":
        direction = str(args[0]).lower()
        if direction not in ("up", "down"):
            raise ValueError(f"lift direction must be up or down, got {args[0]!r}")
        return LiftCmd(direction == "up")
    if kind == "tick":
        return Tick()
    raise ValueError(f"unknown nightstand input {kind!r}")
