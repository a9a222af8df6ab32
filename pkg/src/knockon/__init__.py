"""Cycle-time log analysis for interlinked production lines.

The toolkit ingests start/end event logs from automated stations, labels
delayed actions as source or knock-on errors against logged fault reports,
forecasts upcoming action durations with small seq2seq models, and scores
forecasts with a time-weighted composite metric. A synthetic line generator
with ground-truth labels ties it all together for validation.
"""

from . import classify, ingest, metrics, pipeline, records, simgen
from .records import (
    ActionDurationTuple,
    ActionKey,
    ActionSequence,
    ActionSpec,
    ErrorReport,
    SequenceClass,
    SequenceLabel,
)

__version__ = "0.1.0"

__all__ = [
    "ActionDurationTuple",
    "ActionKey",
    "ActionSequence",
    "ActionSpec",
    "ErrorReport",
    "SequenceClass",
    "SequenceLabel",
    "classify",
    "ingest",
    "metrics",
    "pipeline",
    "records",
    "simgen",
]
