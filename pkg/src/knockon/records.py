"""Core record types for station cycle-time logs.

Timestamps are integer milliseconds relative to a configurable epoch
(default 2020-01-01T00:00:00Z); durations are real seconds. Integer
timestamps make sorting stable and serialization round-trips exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import IO, Iterable, Iterator

DEFAULT_EPOCH = "2020-01-01T00:00:00Z"

MS_PER_SECOND = 1000
DURATION_TOLERANCE_S = 1e-6


def parse_epoch(iso: str = DEFAULT_EPOCH) -> datetime:
    """Parse an ISO-8601 epoch string into an aware datetime."""
    return datetime.fromisoformat(iso.replace("Z", "+00:00")).astimezone(timezone.utc)


@dataclass(frozen=True)
class ActionKey:
    """Identity of one automated production step at a station."""

    station: str
    vehicle_code: str
    action_id: str


@dataclass(frozen=True)
class ActionDurationTuple:
    """One executed action with its measured interval and duration."""

    key: ActionKey
    start_ts_ms: int
    end_ts_ms: int
    duration: float  # seconds

    @property
    def start_s(self) -> float:
        return self.start_ts_ms / MS_PER_SECOND

    @property
    def end_s(self) -> float:
        return self.end_ts_ms / MS_PER_SECOND


@dataclass(frozen=True)
class ActionSpec:
    """Expected timing for one action: nominal duration and allowed maximum."""

    key: ActionKey
    d_max: float | None = None
    d_nominal: float | None = None

    def __post_init__(self):
        if self.d_max is not None and self.d_max <= 0:
            raise ValueError(f"d_max must be positive, got {self.d_max}")
        if self.d_nominal is not None:
            if self.d_nominal <= 0:
                raise ValueError(f"d_nominal must be positive, got {self.d_nominal}")
            if self.d_max is not None and self.d_nominal > self.d_max:
                raise ValueError("d_nominal must not exceed d_max")


@dataclass(frozen=True)
class ActionSequence:
    """One complete per-vehicle chain of action duration tuples."""

    sequence_id: str
    vehicle_code: str
    tuples: tuple[ActionDurationTuple, ...]

    def __len__(self) -> int:
        return len(self.tuples)


@dataclass(frozen=True)
class ErrorReport:
    """A logged fault message with its time window, station and area."""

    error_id: str
    start_ts_ms: int
    end_ts_ms: int
    station: str
    area: str
    message: str


class SequenceClass(Enum):
    """Four-way sequence classification, plus the combined source+knock-on case."""

    NORMAL = "normal"
    SOURCE = "source"
    KNOCK_ON = "knock_on"
    SOURCE_AND_KNOCK_ON = "source_and_knock_on"
    MISC = "misc"


@dataclass(frozen=True)
class SignificantTuple:
    """A flagged tuple inside a sequence: its index, kind, and matched reports."""

    index: int
    kind: str  # "source" | "knockon"
    matched_error_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class SequenceLabel:
    """Classification result for one sequence."""

    sequence_id: str
    cls: SequenceClass
    significant: tuple[SignificantTuple, ...] = ()
    matched_error_ids: tuple[str, ...] = ()


def _sort_key(t: ActionDurationTuple) -> tuple[int, str]:
    # Ties between simultaneous actions break lexicographically on action_id
    # so windowing is reproducible.
    return (t.start_ts_ms, t.key.action_id)


def validate_sequence(seq: ActionSequence) -> list[str]:
    """Return all invariant violations of a sequence; empty list when well formed."""
    violations: list[str] = []
    if not seq.sequence_id:
        violations.append("empty sequence_id")
    if not seq.tuples:
        violations.append("empty tuples")
        return violations
    for i, t in enumerate(seq.tuples):
        for field_name in ("station", "vehicle_code", "action_id"):
            if not getattr(t.key, field_name):
                violations.append(f"empty key field {field_name} at index {i}")
        if t.duration < 0:
            violations.append(f"negative duration at index {i}")
        span_s = (t.end_ts_ms - t.start_ts_ms) / MS_PER_SECOND
        if not math.isclose(t.duration, span_s, abs_tol=DURATION_TOLERANCE_S):
            violations.append(f"duration mismatch at index {i}")
    for i in range(1, len(seq.tuples)):
        if _sort_key(seq.tuples[i]) < _sort_key(seq.tuples[i - 1]):
            violations.append(f"ordering violation at index {i}")
    return violations


def sort_canonical(seq: ActionSequence) -> ActionSequence:
    """Sort tuples by (start_ts, action_id); idempotent."""
    ordered = tuple(sorted(seq.tuples, key=_sort_key))
    if ordered == seq.tuples:
        return seq
    return ActionSequence(seq.sequence_id, seq.vehicle_code, ordered)


def sort_tuples(tuples: Iterable[ActionDurationTuple]) -> list[ActionDurationTuple]:
    """Canonical (start_ts, action_id) ordering for loose tuples."""
    return sorted(tuples, key=_sort_key)


# --- JSON-lines serialization -------------------------------------------------
#
# Canonical dataset file: one ActionSequence per line, field names exactly as
# in the dataclasses above.


def tuple_to_dict(t: ActionDurationTuple) -> dict:
    return {
        "key": {
            "station": t.key.station,
            "vehicle_code": t.key.vehicle_code,
            "action_id": t.key.action_id,
        },
        "start_ts_ms": t.start_ts_ms,
        "end_ts_ms": t.end_ts_ms,
        "duration": t.duration,
    }


def tuple_from_dict(d: dict) -> ActionDurationTuple:
    k = d["key"]
    return ActionDurationTuple(
        key=ActionKey(k["station"], k["vehicle_code"], k["action_id"]),
        start_ts_ms=int(d["start_ts_ms"]),
        end_ts_ms=int(d["end_ts_ms"]),
        duration=float(d["duration"]),
    )


def sequence_to_dict(seq: ActionSequence) -> dict:
    return {
        "sequence_id": seq.sequence_id,
        "vehicle_code": seq.vehicle_code,
        "tuples": [tuple_to_dict(t) for t in seq.tuples],
    }


def sequence_from_dict(d: dict) -> ActionSequence:
    return ActionSequence(
        sequence_id=d["sequence_id"],
        vehicle_code=d["vehicle_code"],
        tuples=tuple(tuple_from_dict(t) for t in d["tuples"]),
    )


def report_to_dict(r: ErrorReport) -> dict:
    return {
        "error_id": r.error_id,
        "start_ts_ms": r.start_ts_ms,
        "end_ts_ms": r.end_ts_ms,
        "station": r.station,
        "area": r.area,
        "message": r.message,
    }


def report_from_dict(d: dict) -> ErrorReport:
    return ErrorReport(
        error_id=d["error_id"],
        start_ts_ms=int(d["start_ts_ms"]),
        end_ts_ms=int(d["end_ts_ms"]),
        station=d["station"],
        area=d["area"],
        message=d["message"],
    )


def write_jsonl(records: Iterable[dict], stream: IO[str]) -> None:
    for record in records:
        stream.write(json.dumps(record, separators=(",", ":")))
        stream.write("\n")


def read_jsonl(stream: IO[str]) -> Iterator[dict]:
    for line in stream:
        line = line.strip()
        if line:
            yield json.loads(line)


def write_sequences(seqs: Iterable[ActionSequence], stream: IO[str]) -> None:
    write_jsonl((sequence_to_dict(s) for s in seqs), stream)


def read_sequences(stream: IO[str]) -> list[ActionSequence]:
    return [sequence_from_dict(d) for d in read_jsonl(stream)]
