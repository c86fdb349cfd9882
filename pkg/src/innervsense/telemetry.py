"""Bit-exact wire protocol for pad samples plus the pieces around it: a
device emulator that streams a session in real time or flat out, an
ingestion decoder with byte-level resynchronization, and a fan-out publisher
with drop-oldest backpressure.

Frame layout, all multi-byte fields little-endian:

    magic   2B  0xA5 0x5A
    version 1B  = 1
    type    1B  0x01 data | 0x02 meta | 0x03 event
    device  2B  u16
    seq     2B  u16, wraps at 65536
    t_us    8B  u64 device timestamp
    n_ch    1B
    payload     data: n_ch x i16 ADC counts (0.1 Pa/count)
                meta/event: u16 length + UTF-8 text
    crc     2B  CRC-16/CCITT-FALSE over version..payload
"""

from __future__ import annotations

import binascii
import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .core import counts_to_pascals, PressureSample
from .errors import CrcMismatch, InvalidFrame

MAGIC = b"\xa5\x5a"
VERSION = 1
MSG_DATA = 0x01
MSG_META = 0x02
MSG_EVENT = 0x03
SEQ_MOD = 65536
HEADER_LEN = 17  # magic..n_ch inclusive
DATA_FRAME_LEN_1CH = HEADER_LEN + 2 + 2  # 21 bytes: the fixed size for n_ch = 1
MAX_TEXT_LEN = 65535


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF); crc16(b"123456789") == 0x29B1."""
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class Frame:
    msg_type: int
    device_id: int
    seq: int
    timestamp_us: int
    counts: tuple[int, ...] = ()  # data frames
    text: str = ""  # meta/event frames

    def pressures_pa(self) -> tuple[float, ...]:
        return tuple(counts_to_pascals(c) for c in self.counts)


def encode_frame(frame: Frame) -> bytes:
    """Serialize one frame; decode_frame(encode_frame(f)) == f for valid f."""
    if frame.msg_type == MSG_DATA:
        if not frame.counts:
            raise InvalidFrame("data frame needs at least one channel")
        if frame.text:
            raise InvalidFrame("data frame cannot carry text")
        n_ch = len(frame.counts)
        if n_ch > 255:
            raise InvalidFrame(f"too many channels: {n_ch}")
        payload = b"".join(
            int(c).to_bytes(2, "little", signed=True) for c in frame.counts
        )
    elif frame.msg_type in (MSG_META, MSG_EVENT):
        if frame.counts:
            raise InvalidFrame("text frame cannot carry ADC counts")
        raw = frame.text.encode("utf-8")
        if len(raw) > MAX_TEXT_LEN:
            raise InvalidFrame(f"text too long: {len(raw)} bytes")
        n_ch = 0
        payload = len(raw).to_bytes(2, "little") + raw
    else:
        raise InvalidFrame(f"unknown msg_type {frame.msg_type:#x}")
    body = (
        bytes([VERSION, frame.msg_type])
        + int(frame.device_id).to_bytes(2, "little")
        + (int(frame.seq) % SEQ_MOD).to_bytes(2, "little")
        + int(frame.timestamp_us).to_bytes(8, "little")
        + bytes([n_ch])
        + payload
    )
    return MAGIC + body + crc16(body).to_bytes(2, "little")


def _frame_length(buf: bytes, offset: int) -> int | None:
    """Total frame length at offset, or None if the header is incomplete."""
    if len(buf) - offset < HEADER_LEN:
        return None
    msg_type = buf[offset + 3]
    n_ch = buf[offset + 16]
    if msg_type == MSG_DATA:
        return HEADER_LEN + 2 * n_ch + 2
    if msg_type in (MSG_META, MSG_EVENT):
        if len(buf) - offset < HEADER_LEN + 2:
            return None
        text_len = int.from_bytes(buf[offset + 17 : offset + 19], "little")
        return HEADER_LEN + 2 + text_len + 2
    return -1  # unknown type: not a frame start


def decode_frame(data: bytes) -> Frame:
    """Decode exactly one frame; raises InvalidFrame / CrcMismatch."""
    if len(data) < DATA_FRAME_LEN_1CH - 2 or data[:2] != MAGIC:
        raise InvalidFrame("missing magic or truncated frame")
    want = _frame_length(data, 0)
    if want is None or want < 0 or want != len(data):
        raise InvalidFrame(f"frame length mismatch (expected {want}, got {len(data)})")
    body = data[2:-2]
    if crc16(body) != int.from_bytes(data[-2:], "little"):
        raise CrcMismatch("frame CRC check failed")
    if body[0] != VERSION:
        raise InvalidFrame(f"unsupported protocol version {body[0]}")
    msg_type = body[1]
    device_id = int.from_bytes(body[2:4], "little")
    seq = int.from_bytes(body[4:6], "little")
    timestamp_us = int.from_bytes(body[6:14], "little")
    n_ch = body[14]
    payload = body[15:]
    if msg_type == MSG_DATA:
        if n_ch < 1:
            raise InvalidFrame("data frame with zero channels")
        counts = tuple(
            int.from_bytes(payload[2 * i : 2 * i + 2], "little", signed=True)
            for i in range(n_ch)
        )
        return Frame(msg_type, device_id, seq, timestamp_us, counts=counts)
    text_len = int.from_bytes(payload[:2], "little")
    text = payload[2 : 2 + text_len].decode("utf-8")
    return Frame(msg_type, device_id, seq, timestamp_us, text=text)


@dataclass
class StreamHealth:
    """Counters over a decoded stream; updated under a lock, monotone."""

    frames_ok: int = 0
    frames_crc_fail: int = 0
    frames_resync: int = 0
    gaps: int = 0
    gap_sizes: list[int] = field(default_factory=list)
    last_seq: int | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "frames_ok": self.frames_ok,
                "frames_crc_fail": self.frames_crc_fail,
                "frames_resync": self.frames_resync,
                "gaps": self.gaps,
                "gap_sizes": list(self.gap_sizes),
                "last_seq": self.last_seq,
            }


class FrameDecoder:
    """Incremental frame scanner with one-byte-advance resynchronization.

    Corruption is never fatal: bad CRC slides the scan window by one byte,
    garbage between frames is skipped, and every event is counted in health.
    """

    def __init__(self, health: StreamHealth | None = None):
        self.health = health or StreamHealth()
        self._buf = bytearray()
        self._skipping = False  # inside a discarded byte run

    def feed(self, data: bytes) -> list[Frame]:
        self._buf.extend(data)
        buf = self._buf
        n = len(buf)
        frames = []
        pos = 0
        while True:
            idx = buf.find(MAGIC, pos)
            if idx < 0:
                # discard everything except a possible trailing half-magic byte
                keep_from = n - 1 if (n - pos >= 1 and buf[n - 1] == MAGIC[0]) else n
                if keep_from > pos:
                    self._note_skip(True)
                pos = keep_from
                break
            if idx > pos:
                self._note_skip(True)
                pos = idx
            want = _frame_length(buf, pos)
            if want is None:
                break  # header incomplete, wait for more bytes
            if want < 0:
                pos += 1
                self._note_skip(True)
                continue
            if n - pos < want:
                break
            try:
                frame = decode_frame(bytes(buf[pos : pos + want]))
            except CrcMismatch:
                with self.health._lock:
                    self.health.frames_crc_fail += 1
                pos += 1
                self._note_skip(True)
                continue
            except InvalidFrame:
                pos += 1
                self._note_skip(True)
                continue
            pos += want
            self._skipping = False
            self._track_seq(frame)
            frames.append(frame)
        del buf[:pos]
        return frames

    def _note_skip(self, active: bool):
        if active and not self._skipping:
            with self.health._lock:
                self.health.frames_resync += 1
            self._skipping = True

    def _track_seq(self, frame: Frame):
        with self.health._lock:
            self.health.frames_ok += 1
            if frame.msg_type == MSG_DATA:
                if self.health.last_seq is not None:
                    expected = (self.health.last_seq + 1) % SEQ_MOD
                    if frame.seq != expected:
                        size = (frame.seq - self.health.last_seq - 1) % SEQ_MOD
                        self.health.gaps += 1
                        self.health.gap_sizes.append(size)
                self.health.last_seq = frame.seq


def decode_stream(chunks, health: StreamHealth | None = None):
    """Decode an iterable of byte chunks; yields Frames.

    Pass a StreamHealth to observe counters; corruption is counted, not fatal.
    """
    decoder = FrameDecoder(health)
    for chunk in chunks:
        yield from decoder.feed(chunk)


@dataclass(frozen=True)
class EmulationReport:
    frames_sent: int
    events_sent: int
    duration_s: float
    completed: bool


def session_frames(pressure, events=(), device_id: int = 1):
    """Frames for a 50 Hz pressure series plus event frames, timestamp order.

    pressure: TimeSeries in Pa. events: iterable of (t_s, text). Channel
    values are clipped to the representable ADC range, as the real converter
    would.
    """
    ev = sorted(((float(t), str(s)) for t, s in events), key=lambda e: e[0])
    ev_idx = 0
    seq = 0
    out = []
    for t_us, pa in zip(pressure.t_us, pressure.v):
        while ev_idx < len(ev) and round(ev[ev_idx][0] * 1e6) <= t_us:
            out.append(
                Frame(MSG_EVENT, device_id, seq % SEQ_MOD, round(ev[ev_idx][0] * 1e6), text=ev[ev_idx][1])
            )
            ev_idx += 1
        counts = int(min(32767, max(-32768, round(float(pa) * 10.0))))
        out.append(Frame(MSG_DATA, device_id, seq % SEQ_MOD, int(t_us), counts=(counts,)))
        seq += 1
    for t_s, text in ev[ev_idx:]:
        out.append(Frame(MSG_EVENT, device_id, seq % SEQ_MOD, round(t_s * 1e6), text=text))
    return out


def emulate_device(frames, sink, pacing: str = "max", period_s: float = 0.02) -> EmulationReport:
    """Stream encoded frames into a byte sink.

    pacing="realtime" spaces data frames on an absolute 20 ms schedule;
    pacing="max" emits flat out. A closed sink ends emission with a partial
    report rather than raising.
    """
    if pacing not in ("realtime", "max"):
        raise ValueError(f"pacing must be 'realtime' or 'max', got {pacing!r}")
    start = time.monotonic()
    sent = events = data_idx = 0
    completed = True
    for frame in frames:
        if pacing == "realtime" and frame.msg_type == MSG_DATA:
            target = start + data_idx * period_s
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        try:
            sink.write(encode_frame(frame))
            flush = getattr(sink, "flush", None)
            if flush and pacing == "realtime":
                flush()
        except (BrokenPipeError, ConnectionError, OSError, ValueError):
            completed = False
            break
        if frame.msg_type == MSG_DATA:
            data_idx += 1
            sent += 1
        else:
            events += 1
    if not completed:
        duration = time.monotonic() - start
        return EmulationReport(sent, events, duration, False)
    flush = getattr(sink, "flush", None)
    if flush:
        try:
            flush()
        except (BrokenPipeError, ConnectionError, OSError, ValueError):
            pass
    return EmulationReport(sent, events, time.monotonic() - start, True)


class Subscription:
    """One consumer's bounded queue; oldest entries drop on overflow."""

    def __init__(self, maxlen: int):
        self._queue: deque = deque()
        self._maxlen = maxlen
        self._cond = threading.Condition()
        self.drops = 0
        self.closed = False

    def _push(self, item):
        with self._cond:
            if self.closed:
                return
            if len(self._queue) >= self._maxlen:
                self._queue.popleft()
                self.drops += 1
            self._queue.append(item)
            self._cond.notify()

    def get(self, timeout: float | None = None):
        """Next item, or None on timeout/close."""
        with self._cond:
            if not self._queue:
                self._cond.wait(timeout)
            if not self._queue:
                return None
            return self._queue.popleft()

    def drain(self) -> list:
        with self._cond:
            items = list(self._queue)
            self._queue.clear()
            return items

    def close(self):
        with self._cond:
            self.closed = True
            self._cond.notify_all()


class Publisher:
    """Fan-out of samples/events to subscribers; slow consumers never stall
    ingestion (drop-oldest per subscriber, observable drop counters)."""

    def __init__(self, queue_size: int = 1024):
        self._queue_size = queue_size
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()

    def subscribe(self, queue_size: int | None = None) -> Subscription:
        sub = Subscription(queue_size or self._queue_size)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription):
        sub.close()
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def publish(self, item):
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            sub._push(item)

    def close(self):
        with self._lock:
            subs = list(self._subs)
            self._subs.clear()
        for sub in subs:
            sub.close()


def frame_to_sample(frame: Frame) -> PressureSample:
    if frame.msg_type != MSG_DATA:
        raise InvalidFrame("not a data frame")
    return PressureSample(frame.timestamp_us, frame.pressures_pa(), frame.seq)


def sample_message(sample: PressureSample, rx_ms: float | None = None) -> str:
    """Dashboard JSON for one sample; rx_ms is host arrival wall-clock."""
    msg = {"type": "sample", "t_s": sample.timestamp_us / 1e6, "pa": sample.channels[0]}
    if rx_ms is not None:
        msg["rx_ms"] = rx_ms
    return json.dumps(msg)


def event_message(t_s: float, label: str, rx_ms: float | None = None) -> str:
    msg = {"type": "event", "t_s": t_s, "label": label}
    if rx_ms is not None:
        msg["rx_ms"] = rx_ms
    return json.dumps(msg)


def health_message(health: StreamHealth) -> str:
    snap = health.snapshot()
    snap.pop("gap_sizes", None)
    return json.dumps({"type": "health", **snap})
