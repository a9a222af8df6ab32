"""Shared builders for log-record fixtures."""

from __future__ import annotations

import pytest

from knockon.records import ActionDurationTuple, ActionKey, ActionSequence


def make_tuple(
    action_id: str = "A01",
    start_s: float = 0.0,
    duration: float = 10.0,
    station: str = "ST01",
    vehicle: str = "V001",
) -> ActionDurationTuple:
    start_ms = int(round(start_s * 1000))
    dur_ms = int(round(duration * 1000))
    return ActionDurationTuple(
        key=ActionKey(station, vehicle, action_id),
        start_ts_ms=start_ms,
        end_ts_ms=start_ms + dur_ms,
        duration=dur_ms / 1000.0,
    )


def make_sequence(
    sequence_id: str,
    specs: list[tuple[str, float]],
    start_s: float = 0.0,
    station: str = "ST01",
) -> ActionSequence:
    """Back-to-back tuples from (action_id, duration) pairs."""
    tuples = []
    clock = start_s
    for action_id, duration in specs:
        tuples.append(make_tuple(action_id, clock, duration, station=station))
        clock += duration
    return ActionSequence(sequence_id, "V001", tuple(tuples))


@pytest.fixture
def simple_sequence() -> ActionSequence:
    return make_sequence("S0", [("A01", 10.0), ("A02", 20.0), ("A03", 15.0)])
