"""Synthetic interlinked-production-line generator with ground-truth labels.

Each generated sequence is one vehicle passing a station: a short cycle
marker followed by the configured actions back to back. A source delay may
hit one action (emitting an error report over exactly that interval) and
propagate, geometrically decayed, to the following actions without any
report; misc outliers multiply one action's duration far beyond the global
threshold. Every random draw derives from (seed, sequence_index), so output
bytes are reproducible regardless of generation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO

import numpy as np

from .classify import ClassificationReport
from .errors import IdMismatch, InvalidSpec
from .records import MS_PER_SECOND, SequenceClass

MIN_DURATION_S = 0.1


@dataclass(frozen=True)
class ActionTemplate:
    """Nominal timing of one production step."""

    action_id: str
    nominal: float  # seconds
    jitter_sd: float = 0.3


@dataclass(frozen=True)
class DelaySpec:
    mean: float
    sd: float


@dataclass(frozen=True)
class Propagation:
    horizon: int  # number of downstream actions that inherit the delay
    decay: float  # per-step multiplier in (0, 1)


@dataclass(frozen=True)
class LineSpec:
    """Configuration of one simulated station."""

    station: str
    actions: tuple[ActionTemplate, ...]
    boundary_action: str = "CYCLE"
    boundary_nominal: float = 2.5
    boundary_jitter_sd: float = 0.1
    source_rate: float = 0.1
    source_delay: DelaySpec = DelaySpec(25.0, 2.5)
    propagation: Propagation = Propagation(horizon=3, decay=0.55)
    misc_rate: float = 0.01
    misc_scale: float = 25.0
    global_mult: float = 10.0
    vehicle_code: str = "V001"
    inter_sequence_gap_s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.actions:
            raise InvalidSpec("actions must be non-empty")
        for rate, name in ((self.source_rate, "source_rate"), (self.misc_rate, "misc_rate")):
            if not 0.0 <= rate <= 1.0:
                raise InvalidSpec(f"{name} must be in [0, 1], got {rate}")
        for a in self.actions:
            if a.nominal <= 0:
                raise InvalidSpec(f"nominal must be positive for {a.action_id}")
            if a.action_id == self.boundary_action:
                raise InvalidSpec("boundary_action must not appear in actions")
        if not 0.0 < self.propagation.decay < 1.0:
            raise InvalidSpec(f"decay must be in (0, 1), got {self.propagation.decay}")
        if self.propagation.horizon < 0:
            raise InvalidSpec("horizon must be non-negative")
        if self.misc_scale <= self.global_mult:
            raise InvalidSpec("misc_scale must exceed global_mult")


def default_line_spec(seed: int = 0, **overrides) -> LineSpec:
    """A ten-action station whose delay scales separate cleanly from jitter."""
    actions = tuple(
        ActionTemplate(f"A{i + 1:02d}", nominal, 0.3)
        for i, nominal in enumerate([12.5, 30.5, 22.5, 45.5, 18.5, 27.5, 33.5, 15.5, 24.5, 38.5])
    )
    return LineSpec(station="ST01", actions=actions, seed=seed, **overrides)


@dataclass(frozen=True)
class TupleTruth:
    """Injected cause and extra delay for one generated tuple."""

    cause: str  # "none" | "source" | "knockon" | "misc"
    injected_delay: float = 0.0


@dataclass(frozen=True)
class SequenceTruth:
    sequence_id: str
    cls: SequenceClass
    tuples: tuple[TupleTruth, ...]
    error_ids: tuple[str, ...] = ()


@dataclass
class GroundTruth:
    """Per-sequence true classes and per-tuple cause tags."""

    sequences: dict[str, SequenceTruth]

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for truth in self.sequences.values():
            counts[truth.cls.value] = counts.get(truth.cls.value, 0) + 1
        return counts

    def to_jsonl(self, stream: IO[str]) -> None:
        for truth in self.sequences.values():
            stream.write(
                json.dumps(
                    {
                        "sequence_id": truth.sequence_id,
                        "class": truth.cls.value,
                        "error_ids": list(truth.error_ids),
                        "tuples": [
                            {"cause": t.cause, "injected_delay": t.injected_delay}
                            for t in truth.tuples
                        ],
                    },
                    separators=(",", ":"),
                )
            )
            stream.write("\n")

    @classmethod
    def from_jsonl(cls, stream: IO[str]) -> "GroundTruth":
        sequences: dict[str, SequenceTruth] = {}
        for line in stream:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            sequences[d["sequence_id"]] = SequenceTruth(
                sequence_id=d["sequence_id"],
                cls=SequenceClass(d["class"]),
                tuples=tuple(
                    TupleTruth(t["cause"], float(t["injected_delay"])) for t in d["tuples"]
                ),
                error_ids=tuple(d["error_ids"]),
            )
        return cls(sequences)


@dataclass
class GeneratedData:
    cycle_csv: str
    error_csv: str
    truth: GroundTruth


def _sequence_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def generate(spec: LineSpec, n_sequences: int) -> GeneratedData:
    """Generate cycle-time and error-report CSV text plus ground truth."""
    if n_sequences < 1:
        raise InvalidSpec(f"n_sequences must be at least 1, got {n_sequences}")

    cycle_rows: list[str] = []
    error_rows: list[str] = []
    truths: dict[str, SequenceTruth] = {}
    clock_ms = 0

    templates = (
        ActionTemplate(spec.boundary_action, spec.boundary_nominal, spec.boundary_jitter_sd),
    ) + spec.actions
    n_real = len(spec.actions)

    for i in range(n_sequences):
        rng = _sequence_rng(spec.seed, i)
        sequence_id = f"S{i:06d}"

        durations = np.array(
            [max(MIN_DURATION_S, t.nominal + rng.normal(0.0, t.jitter_sd)) for t in templates]
        )
        causes = ["none"] * len(templates)
        injected = [0.0] * len(templates)

        # Injections target real actions only; index 0 is the cycle marker.
        source_index: int | None = None
        if rng.random() < spec.source_rate:
            source_index = 1 + int(rng.integers(n_real))
            delay = max(0.0, rng.normal(spec.source_delay.mean, spec.source_delay.sd))
            durations[source_index] += delay
            causes[source_index] = "source"
            injected[source_index] = delay
            for step in range(1, spec.propagation.horizon + 1):
                j = source_index + step
                if j >= len(templates):
                    break
                knock = delay * spec.propagation.decay**step
                durations[j] += knock
                causes[j] = "knockon"
                injected[j] = knock

        misc_hit = rng.random() < spec.misc_rate
        if misc_hit:
            misc_index = 1 + int(rng.integers(n_real))
            extra = durations[misc_index] * (spec.misc_scale - 1.0)
            durations[misc_index] *= spec.misc_scale
            causes[misc_index] = "misc"
            injected[misc_index] = extra

        error_ids: list[str] = []
        tuple_truths: list[TupleTruth] = []
        for j, template in enumerate(templates):
            start_ms = clock_ms
            dur_ms = int(round(durations[j] * MS_PER_SECOND))
            end_ms = start_ms + dur_ms
            base = f"{sequence_id},{spec.station},{spec.vehicle_code},{template.action_id}"
            cycle_rows.append(f"{base},start,{start_ms},")
            cycle_rows.append(f"{base},end,{end_ms},{dur_ms}")
            if causes[j] == "source":
                error_id = f"E{i:06d}"
                error_ids.append(error_id)
                error_rows.append(
                    f"{error_id},{start_ms},{end_ms},{spec.station},,component supply stall"
                )
            tuple_truths.append(TupleTruth(causes[j], injected[j]))
            clock_ms = end_ms
        clock_ms += int(round(spec.inter_sequence_gap_s * MS_PER_SECOND))

        if misc_hit:
            cls = SequenceClass.MISC
        elif source_index is not None:
            has_knockon = any(t.cause == "knockon" for t in tuple_truths)
            cls = SequenceClass.SOURCE_AND_KNOCK_ON if has_knockon else SequenceClass.SOURCE
        else:
            cls = SequenceClass.NORMAL
        truths[sequence_id] = SequenceTruth(
            sequence_id, cls, tuple(tuple_truths), tuple(error_ids)
        )

    cycle_csv = (
        "sequence_id,station,vehicle_code,action_id,event,timestamp_ms,duration_ms\n"
        + "\n".join(cycle_rows)
        + "\n"
    )
    error_csv = "error_id,start_ts_ms,end_ts_ms,station,area,message\n"
    if error_rows:
        error_csv += "\n".join(error_rows) + "\n"
    return GeneratedData(cycle_csv, error_csv, GroundTruth(truths))


def write_outputs(data: GeneratedData, out_dir) -> dict[str, str]:
    """Write cycle_times.csv, error_reports.csv and truth.jsonl into out_dir."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "cycle_times": out / "cycle_times.csv",
        "error_reports": out / "error_reports.csv",
        "truth": out / "truth.jsonl",
    }
    paths["cycle_times"].write_text(data.cycle_csv)
    paths["error_reports"].write_text(data.error_csv)
    with paths["truth"].open("w") as fh:
        data.truth.to_jsonl(fh)
    return {name: str(p) for name, p in paths.items()}


_COLLAPSED = {
    SequenceClass.NORMAL: "normal",
    SequenceClass.SOURCE: "source",
    SequenceClass.SOURCE_AND_KNOCK_ON: "source",
    SequenceClass.KNOCK_ON: "knock_on",
    SequenceClass.MISC: "misc",
}

SCORE_CLASSES = ("normal", "source", "knock_on", "misc")


@dataclass
class ScoreCard:
    """Confusion matrix over collapsed classes plus source-tuple matching scores."""

    confusion: dict[str, dict[str, int]]
    accuracy: float
    source_tuple_precision: float
    source_tuple_recall: float

    def __str__(self) -> str:
        lines = ["truth \\ predicted: " + " ".join(f"{c:>9}" for c in SCORE_CLASSES)]
        for truth_cls in SCORE_CLASSES:
            row = self.confusion[truth_cls]
            lines.append(
                f"{truth_cls:>18} " + " ".join(f"{row[c]:>9}" for c in SCORE_CLASSES)
            )
        lines.append(f"accuracy {self.accuracy:.4f}")
        lines.append(
            f"source tuples: precision {self.source_tuple_precision:.4f} "
            f"recall {self.source_tuple_recall:.4f}"
        )
        return "\n".join(lines)


def score_classifier(truth: GroundTruth, report: ClassificationReport) -> ScoreCard:
    """Score predicted labels against generated ground truth.

    Source-and-knock-on collapses into source on both sides; source-tuple
    precision/recall compare the (sequence, index) sets of tuples the
    classifier matched to an error report against the truly injected ones.
    """
    truth_ids = set(truth.sequences)
    predicted_ids = set(report.labels)
    if truth_ids != predicted_ids:
        missing = sorted(truth_ids ^ predicted_ids)[:5]
        raise IdMismatch(f"sequence id sets differ, e.g. {missing}")

    confusion = {t: {p: 0 for p in SCORE_CLASSES} for t in SCORE_CLASSES}
    correct = 0
    for sequence_id, seq_truth in truth.sequences.items():
        t_cls = _COLLAPSED[seq_truth.cls]
        p_cls = _COLLAPSED[report.labels[sequence_id].cls]
        confusion[t_cls][p_cls] += 1
        if t_cls == p_cls:
            correct += 1

    true_sources = {
        (sid, i)
        for sid, seq_truth in truth.sequences.items()
        for i, t in enumerate(seq_truth.tuples)
        if t.cause == "source"
    }
    predicted_sources = {
        (sid, f.index)
        for sid, label in report.labels.items()
        for f in label.significant
        if f.kind == "source"
    }
    tp = len(true_sources & predicted_sources)
    precision = tp / len(predicted_sources) if predicted_sources else 0.0
    recall = tp / len(true_sources) if true_sources else 0.0

    total = len(truth.sequences)
    return ScoreCard(
        confusion=confusion,
        accuracy=correct / total if total else 0.0,
        source_tuple_precision=precision,
        source_tuple_recall=recall,
    )
