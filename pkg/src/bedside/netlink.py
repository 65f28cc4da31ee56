"""Byte-framed radio link between the room controller and the robot.

Wire format::

    tag:u8  seq:u16be  len:u8  payload[len]  xor:u8

``xor`` is the XOR of every preceding byte, so a valid frame XORs to zero.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from . import config


class FrameError(ValueError):
    pass


class ChecksumMismatch(FrameError):
    pass


class Truncated(FrameError):
    pass


class UnknownType(FrameError):
    pass


class BadPayload(FrameError):
    pass


class PersonKind(enum.IntEnum):
    GotUp = 0
    LayDown = 1


# t_ms fields are integer milliseconds of simulation time


@dataclass(frozen=True)
class PersonEvent:
    kind: PersonKind
    t_ms: int


@dataclass(frozen=True)
class NavigateTo:
    waypoints: tuple
    chunk: int = 0
    n_chunks: int = 1


@dataclass(frozen=True)
class ArrivedAt:
    cell: tuple


@dataclass(frozen=True)
class DoorClosed:
    t_ms: int


@dataclass(frozen=True)
class Retreat:
    waypoints: tuple
    chunk: int = 0
    n_chunks: int = 1


@dataclass(frozen=True)
class Heartbeat:
    pass


TAGS = {PersonEvent: 0x01, NavigateTo: 0x02, ArrivedAt: 0x03, DoorClosed: 0x04, Retreat: 0x05, Heartbeat: 0x06}
BY_TAG = {v: k for k, v in TAGS.items()}
# one chunk byte plus 2x u16 per waypoint must fit in MAX_PAYLOAD
MAX_WAYPOINTS = (config.MAX_PAYLOAD - 1) // 4


def xor8(data: bytes) -> int:
    x = 0
    for b in data:
        x ^= b
    return x


@dataclass(frozen=True)
class Frame:
    tag: int
    seq: int
    payload: bytes

    def to_bytes(self) -> bytes:
        if len(self.payload) > config.MAX_PAYLOAD:
            raise FrameError(f"payload of {len(self.payload)} bytes exceeds {config.MAX_PAYLOAD}")
        if not 0 <= self.seq <= 0xFFFF:
            raise FrameError(f"sequence number {self.seq} out of range")
        head = struct.pack(">BHB", self.tag, self.seq, len(self.payload)) + bytes(self.payload)
        return head + bytes([xor8(head)])

    @classmethod
    def from_bytes(cls, data: bytes) -> Frame:
        data = bytes(data)
        if len(data) < 5:
            raise Truncated(f"frame of {len(data)} bytes is shorter than the 5-byte minimum")
        tag, seq, n = struct.unpack(">BHB", data[:4])
        if n > config.MAX_PAYLOAD:
            raise BadPayload(f"declared payload length {n} exceeds {config.MAX_PAYLOAD}")
        if len(data) < 5 + n:
            raise Truncated(f"frame declares {n} payload bytes but carries {len(data) - 5}")
        if len(data) > 5 + n:
            raise BadPayload(f"{len(data) - 5 - n} trailing bytes after frame")
        if xor8(data) != 0:
            raise ChecksumMismatch(f"checksum 0x{data[-1]:02x} does not match 0x{xor8(data[:-1]):02x}")
        if tag not in BY_TAG:
            raise UnknownType(f"unknown type tag 0x{tag:02x}")
        return cls(tag, seq, data[4:-1])


def _pack_cells(cells):
    out = b""
    for r, c in cells:
        if not (0 <= r <= 0xFFFF and 0 <= c <= 0xFFFF):
            raise FrameError(f"cell ({r}, {c}) does not fit in 16 bits")
        out += struct.pack(">HH", r, c)
    return out


def _unpack_cells(data):
    if len(data) % 4:
        raise BadPayload("waypoint payload is not a whole number of cells")
    return tuple(struct.unpack(">HH", data[i : i + 4]) for i in range(0, len(data), 4))


def _payload(msg) -> bytes:
    if isinstance(msg, PersonEvent):
        return struct.pack(">BI", int(msg.kind), msg.t_ms)
    if isinstance(msg, (NavigateTo, Retreat)):
        if not msg.waypoints:
            raise FrameError("waypoint list must not be empty")
        if len(msg.waypoints) > MAX_WAYPOINTS:
            raise FrameError(f"{len(msg.waypoints)} waypoints exceed {MAX_WAYPOINTS} per frame")
        if not (0 <= msg.chunk < msg.n_chunks <= 16):
            raise FrameError(f"bad chunk {msg.chunk} of {msg.n_chunks}")
        return bytes([(msg.chunk << 4) | (msg.n_chunks - 1)]) + _pack_cells(msg.waypoints)
    if isinstance(msg, ArrivedAt):
        return _pack_cells([msg.cell])
    if isinstance(msg, DoorClosed):
        return struct.pack(">I", msg.t_ms)
    if isinstance(msg, Heartbeat):
        return b""
    raise TypeError(f"not a link message: {msg!r}")


def encode(msg, seq: int = 0) -> bytes:
    return Frame(TAGS[type(msg)], seq, _payload(msg)).to_bytes()


def message_of(frame: Frame):
    kind, p = BY_TAG[frame.tag], frame.payload
    try:
        if kind is PersonEvent:
            if len(p) != 5:
                raise BadPayload("PersonEvent payload must be 5 bytes")
            k, t = struct.unpack(">BI", p)
            return PersonEvent(PersonKind(k), t)
        if kind in (NavigateTo, Retreat):
            if len(p) < 5:
                raise BadPayload("waypoint message carries no waypoints")
            chunk, n = p[0] >> 4, (p[0] & 0x0F) + 1
            if chunk >= n:
                raise BadPayload(f"chunk {chunk} of {n}")
            return kind(_unpack_cells(p[1:]), chunk, n)
        if kind is ArrivedAt:
            if len(p) != 4:
                raise BadPayload("ArrivedAt payload must be 4 bytes")
            return ArrivedAt(_unpack_cells(p)[0])
        if kind is DoorClosed:
            if len(p) != 4:
                raise BadPayload("DoorClosed payload must be 4 bytes")
            return DoorClosed(struct.unpack(">I", p)[0])
        if p:
            raise BadPayload("Heartbeat carries no payload")
        return Heartbeat()
    except (struct.error, ValueError) as e:
        if isinstance(e, FrameError):
            raise
        raise BadPayload(str(e)) from None


def decode(data: bytes):
    return message_of(Frame.from_bytes(data))


def chunked(kind, waypoints):
    """Split a long waypoint list across as many frames as needed."""
    pts = tuple(tuple(map(int, p)) for p in waypoints)
    parts = [pts[i : i + MAX_WAYPOINTS] for i in range(0, len(pts), MAX_WAYPOINTS)] or [()]
    return [kind(p, i, len(parts)) for i, p in enumerate(parts)]


def hexdump(data: bytes) -> str:
    return data.hex(" ")


@dataclass(frozen=True)
class LinkConfig:
    mean_delay: float = config.LINK_MEAN_DELAY_MS
    jitter_sigma: float = 0.0
    drop_prob: float = 0.0
    range_limit: float = config.LINK_RANGE_FT
    distance: float = 20.0
    tail_prob: float = 0.0
    tail_delay: float = 500.0  # extra ms added on a long-tail event

    def __post_init__(self):
        if not self.mean_delay > 0:
            raise ValueError("mean_delay must be positive")
        if not 0 <= self.drop_prob < 1:
            raise ValueError("drop_prob must lie in [0, 1)")
        if self.jitter_sigma < 0 or self.distance < 0 or not 0 <= self.tail_prob <= 1:
            raise ValueError("invalid link configuration")


@dataclass(frozen=True)
class Delivered:
    at: float  # ms


@dataclass(frozen=True)
class Dropped:
    reason: str


def send(link: LinkConfig, frame, now: float, seed=None):
    """Fate of one transmission started at ``now`` ms.

    ``seed`` may be an int or a ``numpy.random.Generator``; the same number
    of draws is consumed whatever the outcome, so later sends stay aligned.
    """
    if now < 0:
        raise ValueError("send time must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u_drop, z, u_tail = rng.random(), rng.standard_normal(), rng.random()
    if link.distance > link.range_limit:
        return Dropped("out of range")
    if u_drop < link.drop_prob:
        return Dropped("lost")
    delay = max(config.LINK_MIN_DELAY_MS, link.mean_delay + link.jitter_sigma * z)
    if u_tail < link.tail_prob:
        delay += link.tail_delay
    return Delivered(now + delay)


class Receiver:
    """Reassembles chunked waypoint messages and drops stale sequence numbers per type."""

    def __init__(self):
        self.last_seq = {}
        self._parts = {}

    def accept(self, data: bytes):
        """Returns a complete message, or None if the frame is stale or a partial chunk."""
        frame = Frame.from_bytes(data)
        msg = message_of(frame)
        kind = type(msg)
        base = frame.seq - getattr(msg, "chunk", 0)
        if kind in self.last_seq and base <= self.last_seq[kind]:
            return None
        if isinstance(msg, (NavigateTo, Retreat)) and msg.n_chunks > 1:
            parts = self._parts.setdefault((kind, base), {})
            parts[msg.chunk] = msg.waypoints
            if len(parts) < msg.n_chunks:
                return None
            del self._parts[(kind, base)]
            msg = kind(sum((parts[i] for i in range(msg.n_chunks)), ()), 0, 1)
        self.last_seq[kind] = base
        return msg


class Sender:
    """Allocates sequence numbers; chunks of one message use consecutive numbers."""

    def __init__(self):
        self.seq = 0

    def frames(self, msg):
        msgs = chunked(type(msg), msg.waypoints) if isinstance(msg, (NavigateTo, Retreat)) else [msg]
        out = []
        for m in msgs:
            out.append(encode(m, self.seq))
            self.seq = (self.seq + 1) & 0xFFFF
        return out

