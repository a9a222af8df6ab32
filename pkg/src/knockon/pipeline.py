"""Turn labelled sequences into normalized look-back windows.

Feature rows are [time, action_code, duration, error_type, error_count];
windows pair n consecutive rows with the durations of the m rows that
follow. All features are scaled into [-1, 1] with min/max statistics taken
from the training pairs only (a legacy flag restores fitting before the
split), and the chronological 80/20 split never shuffles.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .classify import ClassificationReport
from .errors import EmptyCorpus
from .records import ActionKey, ActionSequence, SequenceClass, SequenceLabel

logger = logging.getLogger(__name__)

FEATURES = ("time", "action_code", "duration", "error_type", "error_count")
N_FEATURES = len(FEATURES)
DURATION_COLUMN = 2

ERROR_TYPE_NORMAL = 1.0
ERROR_TYPE_SOURCE = 2.0
ERROR_TYPE_KNOCKON = 3.0
ERROR_TYPE_UNDEFINED = 4.0

WINDOW_PRESETS: dict[str, tuple[int, int]] = {
    "5-2": (5, 2),
    "5-5": (5, 5),
    "5-7": (5, 7),
    "7-5": (7, 5),
    "7-7": (7, 7),
}


class FeatureRow(NamedTuple):
    """Semantic view of one feature vector."""

    time: float
    action_code: float
    duration: float
    error_type: float
    error_count: float


@dataclass(frozen=True)
class PipelineConfig:
    n_back: int = 5
    m_fwd: int = 2
    separate: bool = True
    outlier_mode: str = "none"  # "aa" | "aps" | "none"
    global_mult: float = 10.0
    split_fraction: float = 0.8
    legacy_norm: bool = False
    keep_misc: bool = False

    def __post_init__(self):
        if self.n_back < 1 or self.m_fwd < 1:
            raise ValueError("n_back and m_fwd must be at least 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must be in (0, 1)")
        if self.outlier_mode not in ("aa", "aps", "none"):
            raise ValueError(f"unknown outlier_mode {self.outlier_mode!r}")

    @classmethod
    def from_preset(cls, preset: str, **overrides) -> "PipelineConfig":
        n_back, m_fwd = WINDOW_PRESETS[preset]
        return cls(n_back=n_back, m_fwd=m_fwd, **overrides)


@dataclass(frozen=True)
class WindowedPair:
    """n past feature rows and the m future durations they must predict."""

    x: np.ndarray  # (n_back, 5)
    y: np.ndarray  # (m_fwd,)
    sequence_id: str
    start: int
    target_codes: np.ndarray  # (m_fwd,) int action codes
    target_raw: np.ndarray  # (m_fwd,) durations in seconds


@dataclass
class NormalizationParams:
    """Per-feature min/max for the [-1, 1] scaling; constant features map to 0."""

    mins: np.ndarray
    maxs: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.maxs <= self.mins

    def normalize_rows(self, rows: np.ndarray) -> np.ndarray:
        span = np.where(self.constant, 1.0, self.maxs - self.mins)
        out = 2.0 * (rows - self.mins) / span - 1.0
        return np.where(self.constant, 0.0, out)

    def normalize_durations(self, values: np.ndarray) -> np.ndarray:
        lo, hi = self.mins[DURATION_COLUMN], self.maxs[DURATION_COLUMN]
        if hi <= lo:
            return np.zeros_like(values)
        return 2.0 * (values - lo) / (hi - lo) - 1.0

    def denormalize_durations(self, values: np.ndarray) -> np.ndarray:
        lo, hi = self.mins[DURATION_COLUMN], self.maxs[DURATION_COLUMN]
        if hi <= lo:
            return np.full_like(np.asarray(values, dtype=float), lo)
        return (np.asarray(values, dtype=float) + 1.0) * (hi - lo) / 2.0 + lo

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(np.asarray(d["mins"], dtype=float), np.asarray(d["maxs"], dtype=float))


@dataclass
class EncodedSequence:
    sequence_id: str
    rows: np.ndarray  # (n_rows, 5) raw feature values
    codes: np.ndarray  # (n_rows,) int
    raw_durations: np.ndarray  # (n_rows,) seconds
    is_boundary: np.ndarray  # (n_rows,) bool


@dataclass
class EncodedCorpus:
    sequences: list[EncodedSequence]
    vocab: dict[str, int]  # action_id -> code, first-appearance order
    nominal_by_code: dict[int, float]
    global_max_by_code: dict[int, float]


def filter_outliers(
    seqs: list[ActionSequence],
    global_max: Mapping[ActionKey, float],
    mode: str,
) -> tuple[list[ActionSequence], int]:
    """Remove outlier durations: per-tuple ("aa") or whole sequences ("aps").

    Returns the surviving sequences and the number of removed tuples.
    """
    if mode not in ("aa", "aps"):
        raise ValueError(f"unknown outlier mode {mode!r}")
    kept: list[ActionSequence] = []
    removed = 0
    for seq in seqs:
        offenders = [t.duration > global_max.get(t.key, math.inf) for t in seq.tuples]
        if not any(offenders):
            kept.append(seq)
            continue
        if mode == "aps":
            removed += len(seq.tuples)
            continue
        surviving = tuple(t for t, bad in zip(seq.tuples, offenders) if not bad)
        removed += sum(offenders)
        if surviving:
            kept.append(ActionSequence(seq.sequence_id, seq.vehicle_code, surviving))
    return kept, removed


def drop_misc(
    seqs: list[ActionSequence], labels: Mapping[str, SequenceLabel]
) -> list[ActionSequence]:
    """Remove sequences classified misc; source and knock-on stay for training."""
    kept = [s for s in seqs if labels[s.sequence_id].cls is not SequenceClass.MISC]
    if not kept:
        logger.warning("drop_misc removed every sequence")
    return kept


def _tuple_error_fields(
    label: SequenceLabel, n_tuples: int
) -> tuple[np.ndarray, np.ndarray]:
    error_type = np.full(n_tuples, ERROR_TYPE_NORMAL)
    error_count = np.zeros(n_tuples)
    if label.cls is SequenceClass.MISC:
        error_type[:] = ERROR_TYPE_UNDEFINED
        return error_type, error_count
    for f in label.significant:
        error_type[f.index] = ERROR_TYPE_SOURCE if f.kind == "source" else ERROR_TYPE_KNOCKON
        error_count[f.index] = len(f.matched_error_ids)
    return error_type, error_count


def encode_features(
    seqs: list[ActionSequence],
    labels: Mapping[str, SequenceLabel],
    *,
    boundary_action: str | None = None,
    nominal_by_key: Mapping[ActionKey, float] | None = None,
    global_max_by_key: Mapping[ActionKey, float] | None = None,
) -> EncodedCorpus:
    """Encode sequences into raw feature rows with a first-appearance vocabulary."""
    if not seqs:
        raise EmptyCorpus("no sequences to encode")
    vocab: dict[str, int] = {}
    nominal_by_code: dict[int, float] = {}
    global_max_by_code: dict[int, float] = {}
    encoded: list[EncodedSequence] = []
    for seq in seqs:
        n = len(seq.tuples)
        rows = np.zeros((n, N_FEATURES))
        codes = np.zeros(n, dtype=int)
        raw = np.zeros(n)
        boundary = np.zeros(n, dtype=bool)
        error_type, error_count = _tuple_error_fields(labels[seq.sequence_id], n)
        for i, t in enumerate(seq.tuples):
            code = vocab.setdefault(t.key.action_id, len(vocab))
            if nominal_by_key and t.key in nominal_by_key:
                nominal_by_code.setdefault(code, nominal_by_key[t.key])
            if global_max_by_key and t.key in global_max_by_key:
                global_max_by_code.setdefault(code, global_max_by_key[t.key])
            rows[i] = (t.start_s, float(code), t.duration, error_type[i], error_count[i])
            codes[i] = code
            raw[i] = t.duration
            boundary[i] = boundary_action is not None and t.key.action_id == boundary_action
        encoded.append(EncodedSequence(seq.sequence_id, rows, codes, raw, boundary))
    return EncodedCorpus(encoded, vocab, nominal_by_code, global_max_by_code)


def make_windows(
    corpus: EncodedCorpus,
    n_back: int,
    m_fwd: int,
    separate: bool = True,
) -> tuple[list[WindowedPair], list[str]]:
    """Slide unit-stride windows over the corpus.

    With separate=True, windows never cross a sequence boundary and
    boundary-marker rows are excluded first; too-short sequences are skipped
    with a diagnostic. With separate=False, windows slide over all rows
    concatenated, vehicle transitions included.
    """
    if n_back < 1 or m_fwd < 1:
        raise ValueError("n_back and m_fwd must be at least 1")
    diagnostics: list[str] = []
    pairs: list[WindowedPair] = []

    if separate:
        segments = []
        for enc in corpus.sequences:
            keep = ~enc.is_boundary
            segments.append(
                (enc.sequence_id, enc.rows[keep], enc.codes[keep], enc.raw_durations[keep])
            )
    else:
        rows = np.concatenate([e.rows for e in corpus.sequences], axis=0)
        codes = np.concatenate([e.codes for e in corpus.sequences])
        raw = np.concatenate([e.raw_durations for e in corpus.sequences])
        segments = [("corpus", rows, codes, raw)]

    for seq_id, rows, codes, raw in segments:
        n_rows = len(rows)
        n_pairs = n_rows - n_back - m_fwd + 1
        if n_pairs < 1:
            diagnostics.append(f"SequenceTooShort: {seq_id} has {n_rows} rows")
            continue
        for s in range(n_pairs):
            t0 = s + n_back
            pairs.append(
                WindowedPair(
                    x=rows[s:t0].copy(),
                    y=raw[t0 : t0 + m_fwd].copy(),
                    sequence_id=seq_id,
                    start=s,
                    target_codes=codes[t0 : t0 + m_fwd].copy(),
                    target_raw=raw[t0 : t0 + m_fwd].copy(),
                )
            )
    return pairs, diagnostics


def split_train_test(
    pairs: Sequence[WindowedPair], fraction: float
) -> tuple[list[WindowedPair], list[WindowedPair]]:
    """Chronological split: the first ceil(fraction * N) pairs train."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    n_train = math.ceil(fraction * len(pairs))
    train, test = list(pairs[:n_train]), list(pairs[n_train:])
    if not test:
        logger.warning("split_train_test produced an empty test set (%d pairs)", len(pairs))
    return train, test


def fit_normalization(pairs: Sequence[WindowedPair]) -> NormalizationParams:
    """Per-feature min/max over the pairs' input rows and target durations."""
    if not pairs:
        raise EmptyCorpus("no pairs to fit normalization on")
    rows = np.concatenate([p.x for p in pairs], axis=0)
    mins = rows.min(axis=0)
    maxs = rows.max(axis=0)
    targets = np.concatenate([p.y for p in pairs])
    mins[DURATION_COLUMN] = min(mins[DURATION_COLUMN], targets.min())
    maxs[DURATION_COLUMN] = max(maxs[DURATION_COLUMN], targets.max())
    return NormalizationParams(mins=mins, maxs=maxs)


def normalize_pairs(
    pairs: Sequence[WindowedPair], params: NormalizationParams
) -> list[WindowedPair]:
    """Scale x rows and y durations into [-1, 1]; raw target copies stay in seconds."""
    return [
        replace(
            p,
            x=params.normalize_rows(p.x),
            y=params.normalize_durations(p.y),
        )
        for p in pairs
    ]


@dataclass
class PreparedData:
    train: list[WindowedPair]
    test: list[WindowedPair]
    params: NormalizationParams
    vocab: dict[str, int]
    nominal_by_code: dict[int, float]
    global_max_by_code: dict[int, float]
    diagnostics: list[str]
    removed_outliers: int = 0


def prepare_dataset(
    seqs: list[ActionSequence],
    report: ClassificationReport,
    config: PipelineConfig,
    *,
    boundary_action: str | None = None,
) -> PreparedData:
    """Classification output to normalized train/test windows, end to end."""
    labels = report.labels
    working = list(seqs)
    removed = 0
    if config.outlier_mode != "none":
        working, removed = filter_outliers(working, report.global_max, config.outlier_mode)
    if not config.keep_misc:
        working = drop_misc(working, labels)
    if not working:
        raise EmptyCorpus("no sequences left after filtering")

    nominal_by_key = {k: s.d_nominal for k, s in report.specs.items()}
    corpus = encode_features(
        working,
        labels,
        boundary_action=boundary_action,
        nominal_by_key=nominal_by_key,
        global_max_by_key=report.global_max,
    )
    pairs, diagnostics = make_windows(corpus, config.n_back, config.m_fwd, config.separate)
    if not pairs:
        raise EmptyCorpus("windowing produced no pairs")

    train, test = split_train_test(pairs, config.split_fraction)
    fit_on = pairs if config.legacy_norm else train
    params = fit_normalization(fit_on)
    return PreparedData(
        train=normalize_pairs(train, params),
        test=normalize_pairs(test, params),
        params=params,
        vocab=corpus.vocab,
        nominal_by_code=corpus.nominal_by_code,
        global_max_by_code=corpus.global_max_by_code,
        diagnostics=diagnostics,
        removed_outliers=removed,
    )


def pairs_to_arrays(pairs: Sequence[WindowedPair]) -> tuple[np.ndarray, np.ndarray]:
    """Stack pairs into (N, n_back, 5) inputs and (N, m_fwd) targets."""
    if not pairs:
        return np.zeros((0, 0, N_FEATURES)), np.zeros((0, 0))
    x = np.stack([p.x for p in pairs])
    y = np.stack([p.y for p in pairs])
    return x, y


def target_code_matrix(pairs: Sequence[WindowedPair]) -> np.ndarray:
    if not pairs:
        return np.zeros((0, 0), dtype=int)
    return np.stack([p.target_codes for p in pairs])


def target_raw_matrix(pairs: Sequence[WindowedPair]) -> np.ndarray:
    if not pairs:
        return np.zeros((0, 0))
    return np.stack([p.target_raw for p in pairs])
