"""Parsing and assembly of cycle-time and error-report CSV logs.

Every start event is paired with the next end event of the same
(sequence_id, action_id); completed tuples are grouped per vehicle and
partitioned at each occurrence of the cycle-boundary action. Malformed
rows and unmatched events become diagnostics, never silent drops.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import MissingHeader
from .records import (
    ActionDurationTuple,
    ActionKey,
    ActionSequence,
    ErrorReport,
    MS_PER_SECOND,
    sort_tuples,
)

CYCLE_HEADER = [
    "sequence_id",
    "station",
    "vehicle_code",
    "action_id",
    "event",
    "timestamp_ms",
    "duration_ms",
]

ERROR_HEADER = ["error_id", "start_ts_ms", "end_ts_ms", "station", "area", "message"]


@dataclass(frozen=True)
class Diagnostic:
    """One non-fatal finding while ingesting a log."""

    row: int | None
    kind: str
    detail: str

    def to_json(self) -> str:
        return json.dumps({"row": self.row, "kind": self.kind, "detail": self.detail})


@dataclass(frozen=True)
class RawEvent:
    """One parsed cycle-time row; duration_ms is present iff event == 'end'."""

    sequence_id: str
    station: str
    vehicle_code: str
    action_id: str
    event: str  # "start" | "end"
    timestamp_ms: int
    duration_ms: int | None = None


@dataclass(frozen=True)
class HierarchySpec:
    """Superordinate action ids whose rows duplicate their subactions' times."""

    superordinate_ids: frozenset[str] = frozenset()


def _as_lines(source: str | IO[str]) -> IO[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_cycle_times(source: str | IO[str]) -> tuple[list[RawEvent], list[Diagnostic]]:
    """Parse a cycle-times CSV into events plus per-row diagnostics.

    Raises MissingHeader if the header row does not match CYCLE_HEADER.
    """
    reader = csv.reader(_as_lines(source))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeader("cycle-times stream is empty") from None
    if header != CYCLE_HEADER:
        raise MissingHeader(f"expected header {CYCLE_HEADER}, got {header}")

    events: list[RawEvent] = []
    diagnostics: list[Diagnostic] = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CYCLE_HEADER):
            diagnostics.append(
                Diagnostic(row_no, "FieldCount", f"expected {len(CYCLE_HEADER)} fields, got {len(row)}")
            )
            continue
        sequence_id, station, vehicle_code, action_id, event, ts_raw, dur_raw = row
        if event not in ("start", "end"):
            diagnostics.append(Diagnostic(row_no, "ParseFailure", f"unknown event {event!r}"))
            continue
        try:
            timestamp_ms = int(ts_raw)
        except ValueError:
            diagnostics.append(Diagnostic(row_no, "ParseFailure", f"bad timestamp_ms {ts_raw!r}"))
            continue
        duration_ms: int | None = None
        if event == "end":
            try:
                duration_ms = int(dur_raw)
            except ValueError:
                diagnostics.append(Diagnostic(row_no, "ParseFailure", f"bad duration_ms {dur_raw!r}"))
                continue
        elif dur_raw not in ("", None):
            diagnostics.append(
                Diagnostic(row_no, "ParseFailure", "duration_ms populated on a start row")
            )
            continue
        events.append(
            RawEvent(sequence_id, station, vehicle_code, action_id, event, timestamp_ms, duration_ms)
        )
    return events, diagnostics


def pair_events(events: Iterable[RawEvent]) -> tuple[list[ActionDurationTuple], list[Diagnostic]]:
    """Match starts to ends on (sequence_id, action_id) and emit duration tuples.

    Expects events in timestamp order. A second start for an open action
    supersedes the first (the first is reported as OrphanStart); ends without
    an open start and starts never closed are reported and excluded. The
    tuple duration comes from the end row's duration_ms.
    """
    open_starts: dict[tuple[str, str], RawEvent] = {}
    tuples: list[ActionDurationTuple] = []
    diagnostics: list[Diagnostic] = []

    for ev in events:
        match_key = (ev.sequence_id, ev.action_id)
        if ev.event == "start":
            prior = open_starts.get(match_key)
            if prior is not None:
                diagnostics.append(
                    Diagnostic(None, "OrphanStart",
                               f"superseded start for {match_key} at {prior.timestamp_ms}")
                )
            open_starts[match_key] = ev
        else:
            start = open_starts.pop(match_key, None)
            if start is None:
                diagnostics.append(
                    Diagnostic(None, "OrphanEnd", f"end without start for {match_key} at {ev.timestamp_ms}")
                )
                continue
            duration = (ev.duration_ms or 0) / MS_PER_SECOND
            span = (ev.timestamp_ms - start.timestamp_ms) / MS_PER_SECOND
            if abs(duration - span) > 1e-6:
                diagnostics.append(
                    Diagnostic(None, "DurationMismatch",
                               f"{match_key}: duration_ms {ev.duration_ms} vs span {span:.3f}s")
                )
            tuples.append(
                ActionDurationTuple(
                    key=ActionKey(start.station, start.vehicle_code, start.action_id),
                    start_ts_ms=start.timestamp_ms,
                    end_ts_ms=ev.timestamp_ms,
                    duration=duration,
                )
            )

    for match_key, ev in open_starts.items():
        diagnostics.append(
            Diagnostic(None, "OrphanStart", f"start never closed for {match_key} at {ev.timestamp_ms}")
        )
    return tuples, diagnostics


def assemble_sequences(
    tuples: list[ActionDurationTuple],
    boundary_action: str,
    *,
    base_id: str = "P",
    vehicle_code: str | None = None,
) -> list[ActionSequence]:
    """Partition canonically sorted tuples into sequences at each boundary tuple.

    The boundary tuple opens the sequence it belongs to. Tuples before the
    first boundary form a sequence of their own; with a single partition the
    sequence keeps base_id, otherwise parts are suffixed #2, #3, ...
    """
    if not tuples:
        return []
    parts: list[list[ActionDurationTuple]] = []
    current: list[ActionDurationTuple] = []
    for t in tuples:
        if t.key.action_id == boundary_action and current:
            parts.append(current)
            current = []
        current.append(t)
    parts.append(current)

    vehicle = vehicle_code if vehicle_code is not None else tuples[0].key.vehicle_code
    sequences = []
    for i, part in enumerate(parts):
        seq_id = base_id if len(parts) == 1 else (base_id if i == 0 else f"{base_id}#{i + 1}")
        sequences.append(ActionSequence(seq_id, vehicle, tuple(part)))
    return sequences


def strip_hierarchy(
    seqs: Iterable[ActionSequence],
    spec: HierarchySpec,
    *,
    boundary_action: str | None = None,
) -> list[ActionSequence]:
    """Drop superordinate-action tuples; the boundary action is always kept.

    Sequences left empty are dropped.
    """
    stripped: list[ActionSequence] = []
    for seq in seqs:
        kept = tuple(
            t
            for t in seq.tuples
            if t.key.action_id == boundary_action or t.key.action_id not in spec.superordinate_ids
        )
        if kept:
            stripped.append(ActionSequence(seq.sequence_id, seq.vehicle_code, kept))
    return stripped


def parse_error_reports(source: str | IO[str]) -> tuple[list[ErrorReport], list[Diagnostic]]:
    """Parse an error-report CSV; duplicate ids are kept but flagged."""
    reader = csv.reader(_as_lines(source))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeader("error-report stream is empty") from None
    if header != ERROR_HEADER:
        raise MissingHeader(f"expected header {ERROR_HEADER}, got {header}")

    reports: list[ErrorReport] = []
    diagnostics: list[Diagnostic] = []
    seen_ids: set[str] = set()
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(ERROR_HEADER):
            diagnostics.append(
                Diagnostic(row_no, "FieldCount", f"expected {len(ERROR_HEADER)} fields, got {len(row)}")
            )
            continue
        error_id, start_raw, end_raw, station, area, message = row
        try:
            start_ms, end_ms = int(start_raw), int(end_raw)
        except ValueError:
            diagnostics.append(Diagnostic(row_no, "ParseFailure", "bad timestamp"))
            continue
        if start_ms > end_ms:
            diagnostics.append(Diagnostic(row_no, "ParseFailure", "start_ts_ms after end_ts_ms"))
            continue
        if error_id in seen_ids:
            diagnostics.append(Diagnostic(row_no, "Warning", f"duplicate error_id {error_id!r}"))
        seen_ids.add(error_id)
        reports.append(ErrorReport(error_id, start_ms, end_ms, station, area, message))
    return reports, diagnostics


def ingest_cycle_times(
    source: str | IO[str],
    *,
    boundary_action: str,
    hierarchy: HierarchySpec | None = None,
) -> tuple[list[ActionSequence], list[Diagnostic]]:
    """Full cycle-times ingestion: parse, pair, assemble, strip hierarchy.

    Events are grouped by sequence_id before pairing so interleaved vehicles
    cannot cross-match, then each group is partitioned at the boundary action.
    """
    events, diagnostics = parse_cycle_times(source)
    events.sort(key=lambda e: e.timestamp_ms)  # stable: file order breaks ties

    groups: dict[str, list[RawEvent]] = {}
    for ev in events:
        groups.setdefault(ev.sequence_id, []).append(ev)

    sequences: list[ActionSequence] = []
    for sequence_id, group in groups.items():
        tuples, pair_diags = pair_events(group)
        diagnostics.extend(pair_diags)
        if not tuples:
            continue
        sequences.extend(
            assemble_sequences(sort_tuples(tuples), boundary_action, base_id=sequence_id)
        )

    if hierarchy is not None and hierarchy.superordinate_ids:
        sequences = strip_hierarchy(sequences, hierarchy, boundary_action=boundary_action)
    sequences.sort(key=lambda s: (s.tuples[0].start_ts_ms, s.sequence_id))
    return sequences, diagnostics
