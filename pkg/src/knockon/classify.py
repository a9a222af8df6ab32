"""Anomaly labelling from per-action duration histograms.

The most frequent integer-truncated duration of an action is its mode; a
Gaussian centred on that mode is fitted by maximum likelihood (only the
standard deviation is free), and any other duration bin whose empirical
frequency exceeds the fitted density is a significant delay. Significant
delays covered by a logged error report are source errors; the rest are
knock-on errors. Sequences above a global duration threshold, or with only
insignificant exceedances everywhere, fall into the misc bucket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import EmptyInput, InsufficientData, MissingSpec
from .records import (
    ActionDurationTuple,
    ActionKey,
    ActionSequence,
    ActionSpec,
    ErrorReport,
    SequenceClass,
    SequenceLabel,
    SignificantTuple,
)


@dataclass(frozen=True)
class DurationHistogram:
    """Counts of integer-truncated durations for one action."""

    key: ActionKey
    bins: Mapping[int, int]

    @property
    def total(self) -> int:
        return sum(self.bins.values())


@dataclass(frozen=True)
class FittedGaussian:
    """Gaussian with the mode fixed as its mean; degenerate when all mass sits there."""

    mu: float
    sigma: float
    n: int
    degenerate: bool = False


@dataclass(frozen=True)
class SignificanceResult:
    """Duration bins whose frequency exceeds the fitted density."""

    key: ActionKey
    significant_durations: frozenset[int]
    mode: int
    threshold_curve: Mapping[int, float]  # occupied bin -> density value


@dataclass
class ClassificationReport:
    """Per-sequence labels plus aggregate class fractions."""

    labels: dict[str, SequenceLabel]
    fractions: dict[str, float]
    outlier_removed_count: int
    fits: dict[ActionKey, FittedGaussian]
    significance: dict[ActionKey, SignificanceResult]
    specs: dict[ActionKey, ActionSpec]
    global_max: dict[ActionKey, float]


def gaussian_density(x: float, mu: float, sigma: float) -> float:
    """Normal probability density at x."""
    z = (x - mu) / sigma
    return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


def duration_bin(duration: float) -> int:
    """Integer-truncated duration used for all histogram logic."""
    return int(math.floor(duration))


def build_histogram(tuples: Iterable[ActionDurationTuple]) -> DurationHistogram:
    """Count integer-truncated durations for one action's tuples."""
    tuples = list(tuples)
    if not tuples:
        raise EmptyInput("no tuples to histogram")
    key = tuples[0].key
    for t in tuples:
        if t.key != key:
            raise ValueError(f"mixed keys in histogram input: {key} vs {t.key}")
    bins: dict[int, int] = {}
    for t in tuples:
        b = duration_bin(t.duration)
        bins[b] = bins.get(b, 0) + 1
    return DurationHistogram(key=key, bins=bins)


def histogram_from_durations(key: ActionKey, durations: Iterable[float]) -> DurationHistogram:
    bins: dict[int, int] = {}
    for d in durations:
        b = duration_bin(d)
        bins[b] = bins.get(b, 0) + 1
    if not bins:
        raise EmptyInput("no durations to histogram")
    return DurationHistogram(key=key, bins=bins)


def histogram_mode(hist: DurationHistogram) -> int:
    """Most frequent bin; ties go to the smaller duration."""
    return max(hist.bins, key=lambda d: (hist.bins[d], -d))


def fit_mle(hist: DurationHistogram) -> FittedGaussian:
    """Fit the Gaussian with mu fixed at the histogram mode.

    With mu fixed, the likelihood over sigma has the closed-form maximizer
    sigma^2 = (1/N) * sum(count * (d - mu)^2).
    """
    n = hist.total
    if n < 2:
        raise InsufficientData(f"need at least 2 samples, got {n}")
    mode = histogram_mode(hist)
    variance = sum(c * (d - mode) ** 2 for d, c in hist.bins.items()) / n
    sigma = math.sqrt(variance)
    return FittedGaussian(mu=float(mode), sigma=sigma, n=n, degenerate=sigma == 0.0)


def fit_mle_trimmed(hist: DurationHistogram, cutoff: float) -> FittedGaussian:
    """Fit as fit_mle but ignoring bins above cutoff; robust against far outliers."""
    kept = {d: c for d, c in hist.bins.items() if d <= cutoff}
    if not kept:
        kept = dict(hist.bins)
    trimmed = DurationHistogram(key=hist.key, bins=kept)
    if trimmed.total < 2:
        mode = histogram_mode(trimmed)
        return FittedGaussian(mu=float(mode), sigma=0.0, n=trimmed.total, degenerate=True)
    return fit_mle(trimmed)


def detect_significant(hist: DurationHistogram, g: FittedGaussian) -> SignificanceResult:
    """Flag every non-mode bin whose frequency exceeds the fitted density.

    A degenerate fit means only one duration was ever observed; everything
    from that action counts as normal.
    """
    mode = int(g.mu)
    if g.degenerate:
        return SignificanceResult(hist.key, frozenset(), mode, {})
    total = hist.total
    flagged: set[int] = set()
    curve: dict[int, float] = {}
    for d, count in hist.bins.items():
        density = gaussian_density(float(d), g.mu, g.sigma)
        curve[d] = density
        if d != mode and count / total > density:
            flagged.add(d)
    return SignificanceResult(hist.key, frozenset(flagged), mode, curve)


def _index_reports(reports: Iterable[ErrorReport]) -> dict[str, list[ErrorReport]]:
    by_station: dict[str, list[ErrorReport]] = {}
    for r in reports:
        by_station.setdefault(r.station, []).append(r)
    for rs in by_station.values():
        rs.sort(key=lambda r: (r.start_ts_ms, r.end_ts_ms, r.error_id))
    return by_station


def _matching_reports(
    t: ActionDurationTuple, by_station: dict[str, list[ErrorReport]]
) -> tuple[str, ...]:
    # A report matches when its whole interval lies inside the action interval
    # and the stations agree. One report may be shared by several tuples.
    matched = []
    for r in by_station.get(t.key.station, ()):
        if r.start_ts_ms >= t.start_ts_ms and r.end_ts_ms <= t.end_ts_ms:
            matched.append(r.error_id)
    return tuple(matched)


def match_errors(
    seq: ActionSequence,
    significance: Mapping[ActionKey, SignificanceResult],
    reports: Iterable[ErrorReport] | dict[str, list[ErrorReport]],
) -> SequenceLabel:
    """Label a sequence by matching its significant tuples against error reports."""
    by_station = reports if isinstance(reports, dict) else _index_reports(reports)
    flagged: list[SignificantTuple] = []
    all_matched: list[str] = []
    for i, t in enumerate(seq.tuples):
        sig = significance.get(t.key)
        if sig is None or duration_bin(t.duration) not in sig.significant_durations:
            continue
        matched = _matching_reports(t, by_station)
        if matched:
            flagged.append(SignificantTuple(i, "source", matched))
            all_matched.extend(matched)
        else:
            flagged.append(SignificantTuple(i, "knockon"))

    has_source = any(f.kind == "source" for f in flagged)
    has_knockon = any(f.kind == "knockon" for f in flagged)
    if has_source and has_knockon:
        cls = SequenceClass.SOURCE_AND_KNOCK_ON
    elif has_source:
        cls = SequenceClass.SOURCE
    elif has_knockon:
        cls = SequenceClass.KNOCK_ON
    else:
        cls = SequenceClass.NORMAL
    return SequenceLabel(seq.sequence_id, cls, tuple(flagged), tuple(all_matched))


def _group_by_key(seqs: Iterable[ActionSequence]) -> dict[ActionKey, list[float]]:
    durations: dict[ActionKey, list[float]] = {}
    for seq in seqs:
        for t in seq.tuples:
            durations.setdefault(t.key, []).append(t.duration)
    return durations


def _resolve_spec(
    key: ActionKey,
    hist: DurationHistogram,
    supplied: ActionSpec | None,
    global_mult: float,
) -> ActionSpec:
    """Fill missing d_nominal/d_max from the histogram.

    d_nominal defaults to the mode; d_max defaults to mode + 3 sigma where
    sigma is fitted on bins below global_mult * mode, so that far outliers
    cannot inflate their own exclusion threshold.
    """
    mode = histogram_mode(hist)
    d_nominal = supplied.d_nominal if supplied else None
    d_max = supplied.d_max if supplied else None
    if d_nominal is None:
        d_nominal = float(mode) if mode >= 1 else 0.5
    if d_max is None:
        trim_cutoff = global_mult * max(mode, 1)
        trimmed = fit_mle_trimmed(hist, trim_cutoff)
        d_max = float(mode) + 3.0 * trimmed.sigma if trimmed.sigma > 0 else float(mode) + 1.0
    d_max = max(d_max, d_nominal)
    return ActionSpec(key=key, d_max=d_max, d_nominal=d_nominal)


def classify_dataset(
    seqs: list[ActionSequence],
    reports: Iterable[ErrorReport],
    specs: Mapping[ActionKey, ActionSpec] | None = None,
    global_mult: float = 10.0,
) -> ClassificationReport:
    """Classify every sequence as normal, source, knock-on, both, or misc.

    Misc takes precedence: any duration above global_mult * d_max puts the
    whole sequence in the misc bucket and removes it from the histogram fit,
    mirroring outlier removal ahead of the distribution estimation. A
    sequence whose every tuple exceeds its nominal duration without a single
    significant one is also misc. When specs is None all nominal/maximum
    durations are derived from the data; when a mapping is supplied it must
    cover every action that occurs.
    """
    if global_mult <= 1:
        raise ValueError(f"global_mult must exceed 1, got {global_mult}")

    all_durations = _group_by_key(seqs)
    histograms = {
        key: histogram_from_durations(key, ds) for key, ds in all_durations.items()
    }

    resolved: dict[ActionKey, ActionSpec] = {}
    for key, hist in histograms.items():
        supplied = None
        if specs is not None:
            supplied = specs.get(key)
            if supplied is None:
                raise MissingSpec(key.action_id)
        resolved[key] = _resolve_spec(key, hist, supplied, global_mult)

    global_max = {key: global_mult * spec.d_max for key, spec in resolved.items()}

    # Pass 1: misc case (i) — any duration above the global threshold.
    is_global_outlier = {
        seq.sequence_id: any(t.duration > global_max[t.key] for t in seq.tuples)
        for seq in seqs
    }
    outlier_count = sum(is_global_outlier.values())

    # Pass 2: refit on the surviving sequences only, then detect significance.
    clean_durations = _group_by_key(
        s for s in seqs if not is_global_outlier[s.sequence_id]
    )
    fits: dict[ActionKey, FittedGaussian] = {}
    significance: dict[ActionKey, SignificanceResult] = {}
    for key, ds in clean_durations.items():
        hist = histogram_from_durations(key, ds)
        if hist.total < 2:
            fit = FittedGaussian(mu=float(histogram_mode(hist)), sigma=0.0, n=hist.total, degenerate=True)
        else:
            fit = fit_mle(hist)
        fits[key] = fit
        significance[key] = detect_significant(hist, fit)

    by_station = _index_reports(reports)
    labels: dict[str, SequenceLabel] = {}
    for seq in seqs:
        if is_global_outlier[seq.sequence_id]:
            labels[seq.sequence_id] = SequenceLabel(seq.sequence_id, SequenceClass.MISC)
            continue
        label = match_errors(seq, significance, by_station)
        if label.cls is SequenceClass.NORMAL and _all_exceed_nominal(seq, resolved):
            label = SequenceLabel(seq.sequence_id, SequenceClass.MISC)
        labels[seq.sequence_id] = label

    n = len(seqs)
    fractions = {cls.value: 0.0 for cls in SequenceClass}
    for label in labels.values():
        fractions[label.cls.value] += 1.0
    if n:
        fractions = {name: count / n for name, count in fractions.items()}

    return ClassificationReport(
        labels=labels,
        fractions=fractions,
        outlier_removed_count=outlier_count,
        fits=fits,
        significance=significance,
        specs=resolved,
        global_max=global_max,
    )


def _all_exceed_nominal(seq: ActionSequence, specs: Mapping[ActionKey, ActionSpec]) -> bool:
    # Exceedance is judged on integer-truncated durations, matching the
    # histogram granularity: a duration inside the nominal bin is not a delay.
    return all(
        duration_bin(t.duration) > duration_bin(specs[t.key].d_nominal) for t in seq.tuples
    )


def histogram_dump_rows(
    hist: DurationHistogram, sig: SignificanceResult
) -> list[dict[str, object]]:
    """Rows for the duration,count,frequency,density,flagged CSV dump."""
    total = hist.total
    rows = []
    for d in sorted(hist.bins):
        rows.append(
            {
                "duration": d,
                "count": hist.bins[d],
                "frequency": hist.bins[d] / total,
                "density": sig.threshold_curve.get(d, 0.0),
                "flagged": d in sig.significant_durations,
            }
        )
    return rows
