"""Durable on-disk sessions: raw frame log, annotations, ground truth, and
derived artifacts.

Layout (a stable public contract):

    <dir>/manifest.json    written last -> presence marks a finalized session
    <dir>/raw.bin          concatenated wire frames, bit-exact
    <dir>/events.jsonl     one JSON object per line, sorted by timestamp
    <dir>/truth/*.csv      ground-truth TimeSeries (simulation only)
    <dir>/derived/*        analysis outputs, never mutate raw data
"""

from __future__ import annotations

import dataclasses
import json
import shutil
from pathlib import Path

from .core import TimeSeries, Unit
from .errors import AlreadyExists, CorruptSession, VersionMismatch
from .padsim import Event, SessionData
from .telemetry import (
    FrameDecoder,
    MSG_DATA,
    StreamHealth,
    encode_frame,
    frame_to_sample,
    session_frames,
)

SCHEMA_VERSION = 1
SIMULATED_CREATED_AT = "1970-01-01T00:00:00+00:00"  # keeps seeded runs bit-reproducible


@dataclasses.dataclass
class Session:
    manifest: dict
    raw: bytes = b""
    events: list[Event] = dataclasses.field(default_factory=list)
    truth: dict[str, TimeSeries] = dataclasses.field(default_factory=dict)
    derived: dict[str, str] = dataclasses.field(default_factory=dict)  # name -> relative path
    health: StreamHealth | None = None

    @classmethod
    def from_sessiondata(cls, data: SessionData, session_id: str | None = None) -> "Session":
        frames = session_frames(
            data.pressure, [(e.t_s, json.dumps(e.to_dict())) for e in data.events]
        )
        raw = b"".join(encode_frame(f) for f in frames)
        manifest = {
            "id": session_id or f"{data.scenario}-seed{data.seed}",
            "created_at": SIMULATED_CREATED_AT,
            "schema_version": SCHEMA_VERSION,
            "scenario": data.scenario,
            "scenario_params": _jsonable(data.scenario_params),
            "seed": data.seed,
            "pad_params": dataclasses.asdict(data.params),
        }
        return cls(manifest, raw, list(data.events), dict(data.truth))

    def pressure_series(self) -> TimeSeries:
        """Decode raw.bin into the measured pressure series."""
        health = StreamHealth()
        decoder = FrameDecoder(health)
        t_us, pa = [], []
        for frame in decoder.feed(self.raw):
            if frame.msg_type == MSG_DATA:
                sample = frame_to_sample(frame)
                t_us.append(sample.timestamp_us)
                pa.append(sample.channels[0])
        self.health = health
        return TimeSeries(t_us, pa, Unit.PA, rate_hint=50.0)

    def events_with_payload(self, label: str | None = None) -> list[Event]:
        out = [e for e in self.events if label is None or e.label == label]
        return sorted(out, key=lambda e: e.t_s)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items() if _is_plain(v)}
    return obj


def _is_plain(v):
    return isinstance(v, (str, int, float, bool, list, tuple, dict, type(None)))


def write_session(dir_path, session: Session, overwrite: bool = False) -> None:
    """Persist a session; the manifest is written last (atomic finalize)."""
    path = Path(dir_path)
    if path.exists() and (path / "manifest.json").exists():
        if not overwrite:
            raise AlreadyExists(f"session already exists at {path}")
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "raw.bin").write_bytes(session.raw)
    with open(path / "events.jsonl", "w", encoding="utf-8") as f:
        for event in sorted(session.events, key=lambda e: e.t_s):
            f.write(json.dumps(event.to_dict()) + "\n")
    truth_dir = path / "truth"
    truth_dir.mkdir(exist_ok=True)
    for name, series in session.truth.items():
        series.to_csv(truth_dir / f"{name}.csv")
    (path / "derived").mkdir(exist_ok=True)
    manifest = dict(session.manifest)
    manifest.setdefault("schema_version", SCHEMA_VERSION)
    tmp = path / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    tmp.rename(path / "manifest.json")


def read_session(dir_path) -> Session:
    """Reconstruct a session; raw-log corruption surfaces in health, not errors."""
    path = Path(dir_path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise CorruptSession(f"no manifest.json in {path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptSession(f"unreadable manifest in {path}: {exc}") from exc
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise VersionMismatch(f"schema_version {version} (reader supports {SCHEMA_VERSION})")
    raw = (path / "raw.bin").read_bytes() if (path / "raw.bin").exists() else b""
    events = []
    events_path = path / "events.jsonl"
    if events_path.exists():
        with open(events_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                events.append(Event(rec["t_s"], rec["label"], rec.get("payload", {})))
    truth = {}
    truth_dir = path / "truth"
    if truth_dir.is_dir():
        for csv_path in sorted(truth_dir.glob("*.csv")):
            truth[csv_path.stem] = TimeSeries.from_csv(csv_path)
    derived = {}
    derived_dir = path / "derived"
    if derived_dir.is_dir():
        for p in sorted(derived_dir.rglob("*")):
            if p.is_file():
                derived[p.stem] = str(p.relative_to(path))
    return Session(manifest, raw, events, truth, derived)


def write_derived(dir_path, name: str, content: str) -> Path:
    """Add an analysis artifact under derived/; raw data is never touched."""
    path = Path(dir_path) / "derived"
    path.mkdir(parents=True, exist_ok=True)
    out = path / name
    out.write_text(content, encoding="utf-8")
    return out


def append_event(dir_path, event: Event) -> None:
    """Append one annotation to a session's event log (recording mode)."""
    path = Path(dir_path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "events.jsonl", "a", encoding="utf-8") as f:
        f.write(json.dumps(event.to_dict()) + "\n")
