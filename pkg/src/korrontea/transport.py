"""Slice serialization and point-to-point channels.

Wire format (little-endian), one frame per synchronous slice:

    magic "KRRT"  4 bytes
    version       u8  (currently 1)
    site length   u16, site id bytes (utf-8)
    time stamp    i64
    flow count    u16
    per flow:   flow-id length u16, flow id bytes (utf-8), unit count u32
    per unit:   sequence number u32, sample count u32
    per sample: payload length u32, payload bytes

Sample coding-format tags are not carried on the wire (they are a per-flow
property); pass a flow registry to `decode_slice` to restore them.

The simulated channel is FIFO with a seeded uniform integer delay in
[base_delay, base_delay + jitter_bound]; arrivals are clamped to the
previous arrival so jitter never reorders.  Socket mode exchanges one
version byte, then streams frames over TCP.
"""

from __future__ import annotations

import enum
import random
import socket
import struct
from collections import deque
from dataclasses import dataclass
from types import SimpleNamespace
from typing import Mapping, Optional

from .errors import (
    ChannelClosed,
    MalformedFrame,
    SequenceGap,
    VersionMismatch,
)
from .model import (
    FlowDescriptor,
    InformationUnit,
    Sample,
    SynchronousSlice,
    validate_slice,
)

MAGIC = b"KRRT"
WIRE_VERSION = 1


def encode_slice(s: SynchronousSlice) -> bytes:
    """Serialize one slice to a self-delimiting frame."""
    problems = validate_slice(s)
    if problems:
        raise ValueError("; ".join(problems))
    parts = [MAGIC, struct.pack("<B", WIRE_VERSION)]
    site = s.site.encode("utf-8")
    parts.append(struct.pack("<H", len(site)))
    parts.append(site)
    parts.append(struct.pack("<q", s.time_stamp))
    parts.append(struct.pack("<H", len(s.units)))
    for fid, ius in s.units.items():
        fid_b = fid.encode("utf-8")
        parts.append(struct.pack("<H", len(fid_b)))
        parts.append(fid_b)
        parts.append(struct.pack("<I", len(ius)))
        for iu in ius:
            parts.append(struct.pack("<II", iu.sequence_number, len(iu.samples)))
            for sample in iu.samples:
                parts.append(struct.pack("<I", len(sample.payload)))
                parts.append(sample.payload)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedFrame(
                f"frame truncated at byte {self.pos} (need {n} more)"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))


def decode_slice(
    data: bytes,
    flows: Optional[Mapping[str, FlowDescriptor]] = None,
) -> SynchronousSlice:
    """Parse one frame back into a slice, re-checking its invariants.

    The whole buffer must be exactly one frame.  With a flow registry the
    samples' coding-format tags are restored from their flow descriptors.
    """
    r = _Reader(data)
    if r.read(4) != MAGIC:
        raise MalformedFrame("bad magic")
    (version,) = r.unpack("<B")
    if version != WIRE_VERSION:
        raise VersionMismatch(f"version {version}, expected {WIRE_VERSION}")
    (site_len,) = r.unpack("<H")
    site = r.read(site_len).decode("utf-8")
    (time_stamp,) = r.unpack("<q")
    (flow_count,) = r.unpack("<H")
    units: dict[str, tuple[InformationUnit, ...]] = {}
    for _ in range(flow_count):
        (fid_len,) = r.unpack("<H")
        fid = r.read(fid_len).decode("utf-8")
        fmt = ""
        if flows is not None and fid in flows:
            fmt = flows[fid].coding_format
        (unit_count,) = r.unpack("<I")
        ius = []
        for _ in range(unit_count):
            seq, sample_count = r.unpack("<II")
            samples = []
            for _ in range(sample_count):
                (payload_len,) = r.unpack("<I")
                samples.append(Sample(r.read(payload_len), fmt))
            if seq < 1 or not samples:
                raise MalformedFrame("invalid information unit")
            ius.append(InformationUnit(fid, seq, tuple(samples)))
        units[fid] = tuple(ius)
    if r.pos != len(data):
        raise MalformedFrame(f"{len(data) - r.pos} trailing bytes")
    candidate = SimpleNamespace(time_stamp=time_stamp, site=site, units=units)
    problems = validate_slice(candidate, flows)
    if problems:
        raise SequenceGap(problems)
    return SynchronousSlice(time_stamp=time_stamp, site=site, units=units)


class ChannelMode(enum.Enum):
    SIMULATED = "simulated"
    SOCKET = "socket"


@dataclass(frozen=True)
class ChannelConfig:
    base_delay: int = 0
    jitter_bound: int = 0
    seed: int = 0
    mode: ChannelMode = ChannelMode.SIMULATED

    def __post_init__(self):
        if self.base_delay < 0 or self.jitter_bound < 0:
            raise ValueError("delays must be non-negative")


class Channel:
    """Simulated FIFO conduit with deterministic seeded jitter.

    Slices are serialized on send and parsed on delivery, so a simulated
    run exercises the same frames a socket run would carry.
    """

    def __init__(
        self,
        config: ChannelConfig,
        flows: Optional[Mapping[str, FlowDescriptor]] = None,
    ):
        if config.mode is not ChannelMode.SIMULATED:
            raise ValueError("Channel implements simulated mode only")
        self.config = config
        self._flows = dict(flows) if flows is not None else None
        self._rng = random.Random(config.seed)
        self._in_flight: deque[tuple[int, bytes]] = deque()
        self._last_arrival: Optional[int] = None
        self._last_send: Optional[int] = None
        self._closed = False

    def send(self, s: SynchronousSlice, send_tick: int) -> int:
        """Enqueue a slice; returns its arrival tick."""
        if self._closed:
            raise ChannelClosed("send on closed channel")
        if self._last_send is not None and send_tick < self._last_send:
            raise ValueError("send ticks must not decrease")
        self._last_send = send_tick
        delay = self.config.base_delay + self._rng.randint(
            0, self.config.jitter_bound
        )
        arrival = send_tick + delay
        if self._last_arrival is not None and arrival < self._last_arrival:
            arrival = self._last_arrival  # FIFO clamp
        self._last_arrival = arrival
        self._in_flight.append((arrival, encode_slice(s)))
        return arrival

    def deliver(self, up_to_tick: int) -> list[tuple[SynchronousSlice, int]]:
        """Pop every slice whose arrival tick is at most `up_to_tick`."""
        out = []
        while self._in_flight and self._in_flight[0][0] <= up_to_tick:
            arrival, frame = self._in_flight.popleft()
            out.append((decode_slice(frame, self._flows), arrival))
        return out

    def close(self) -> None:
        self._closed = True

    def __len__(self) -> int:
        return len(self._in_flight)


# --- socket conduit (wall-clock demo path) ---

def _recv_exact(conn: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed mid-frame")
        buf += chunk
    return buf


def client_handshake(conn: socket.socket) -> None:
    """Send our version byte and check the server's."""
    conn.sendall(bytes([WIRE_VERSION]))
    theirs = _recv_exact(conn, 1)[0]
    if theirs != WIRE_VERSION:
        raise VersionMismatch(f"server speaks version {theirs}")


def server_handshake(conn: socket.socket) -> None:
    """Check the client's version byte and reply with ours."""
    theirs = _recv_exact(conn, 1)[0]
    conn.sendall(bytes([WIRE_VERSION]))
    if theirs != WIRE_VERSION:
        raise VersionMismatch(f"client speaks version {theirs}")


def write_frame(conn: socket.socket, s: SynchronousSlice) -> None:
    frame = encode_slice(s)
    conn.sendall(struct.pack("<I", len(frame)) + frame)


def read_frame(
    conn: socket.socket,
    flows: Optional[Mapping[str, FlowDescriptor]] = None,
) -> Optional[SynchronousSlice]:
    """Read one length-prefixed frame; None on clean end of stream."""
    header = b""
    while len(header) < 4:
        chunk = conn.recv(4 - len(header))
        if not chunk:
            if not header:
                return None
            raise MalformedFrame("stream ended inside frame header")
        header += chunk
    (length,) = struct.unpack("<I", header)
    return decode_slice(_recv_exact(conn, length), flows)
