import numpy as np
import pytest

from knockon import simgen
from knockon.classify import ClassificationReport, classify_dataset
from knockon.errors import IdMismatch, InvalidSpec
from knockon.ingest import ingest_cycle_times, parse_error_reports
from knockon.records import SequenceClass, SequenceLabel


def _spec(**overrides):
    return simgen.default_line_spec(seed=99, **overrides)


def test_clean_spec_generates_all_normal_truth():
    data = simgen.generate(_spec(source_rate=0.0, misc_rate=0.0), 50)
    counts = data.truth.class_counts()
    assert counts == {"normal": 50}
    assert data.error_csv.strip().count("\n") == 0  # header only


def test_forced_source_with_fixed_delay_propagates_geometrically():
    spec = _spec(
        source_rate=1.0,
        source_delay=simgen.DelaySpec(20.0, 0.0),
        propagation=simgen.Propagation(horizon=2, decay=0.5),
        misc_rate=0.0,
    )
    data = simgen.generate(spec, 200)
    nominal = {a.action_id: a.nominal for a in spec.actions}
    jitter = max(a.jitter_sd for a in spec.actions)
    seqs, _ = ingest_cycle_times(data.cycle_csv, boundary_action=spec.boundary_action)
    by_id = {s.sequence_id: s for s in seqs}
    for sid, truth in data.truth.sequences.items():
        assert truth.cls in (SequenceClass.SOURCE, SequenceClass.SOURCE_AND_KNOCK_ON)
        injected = [t.injected_delay for t in truth.tuples if t.cause != "none"]
        expected = [20.0, 10.0, 5.0][: len(injected)]
        assert injected == pytest.approx(expected)
        # measured durations carry nominal + delay up to jitter
        for i, t in enumerate(truth.tuples):
            if t.cause == "none":
                continue
            measured = by_id[sid].tuples[i].duration
            action_id = by_id[sid].tuples[i].key.action_id
            assert measured == pytest.approx(
                nominal[action_id] + t.injected_delay, abs=4 * jitter
            )


def test_same_seed_is_byte_identical():
    a = simgen.generate(_spec(), 100)
    b = simgen.generate(_spec(), 100)
    assert a.cycle_csv == b.cycle_csv
    assert a.error_csv == b.error_csv


def test_different_seed_differs():
    a = simgen.generate(_spec(), 50)
    b = simgen.generate(simgen.default_line_spec(seed=100), 50)
    assert a.cycle_csv != b.cycle_csv


def test_round_trip_through_ingest_is_clean():
    spec = _spec()
    data = simgen.generate(spec, 200)
    seqs, diags = ingest_cycle_times(data.cycle_csv, boundary_action=spec.boundary_action)
    reports, rdiags = parse_error_reports(data.error_csv)
    assert diags == [] and rdiags == []
    assert len(seqs) == 200
    assert all(len(s.tuples) == len(spec.actions) + 1 for s in seqs)


def test_error_reports_lie_within_their_source_tuple():
    spec = _spec(source_rate=0.5)
    data = simgen.generate(spec, 300)
    seqs, _ = ingest_cycle_times(data.cycle_csv, boundary_action=spec.boundary_action)
    reports, _ = parse_error_reports(data.error_csv)
    by_id = {s.sequence_id: s for s in seqs}
    matched = 0
    for sid, truth in data.truth.sequences.items():
        for error_id in truth.error_ids:
            report = next(r for r in reports if r.error_id == error_id)
            source_idx = next(i for i, t in enumerate(truth.tuples) if t.cause == "source")
            tup = by_id[sid].tuples[source_idx]
            assert tup.start_ts_ms <= report.start_ts_ms
            assert report.end_ts_ms <= tup.end_ts_ms
            matched += 1
    assert matched == len(reports) > 0


def test_unperturbed_marginal_mean_is_sane():
    spec = _spec(source_rate=0.0, misc_rate=0.0)
    data = simgen.generate(spec, 1000)
    seqs, _ = ingest_cycle_times(data.cycle_csv, boundary_action=spec.boundary_action)
    first = spec.actions[0]
    durations = np.array(
        [t.duration for s in seqs for t in s.tuples if t.key.action_id == first.action_id]
    )
    tolerance = 5 * first.jitter_sd / np.sqrt(len(durations))
    assert abs(durations.mean() - first.nominal) < tolerance + 1e-3  # ms rounding


def test_invalid_specs_rejected():
    with pytest.raises(InvalidSpec):
        _spec(source_rate=1.5)
    with pytest.raises(InvalidSpec):
        _spec(misc_scale=5.0)  # must exceed global_mult
    with pytest.raises(InvalidSpec):
        _spec(propagation=simgen.Propagation(horizon=2, decay=1.0))
    with pytest.raises(InvalidSpec):
        simgen.generate(_spec(), 0)


def test_write_outputs_round_trips_truth(tmp_path):
    data = simgen.generate(_spec(), 20)
    paths = simgen.write_outputs(data, tmp_path / "out")
    with open(paths["truth"]) as fh:
        truth = simgen.GroundTruth.from_jsonl(fh)
    assert truth.sequences.keys() == data.truth.sequences.keys()
    assert truth.sequences["S000000"] == data.truth.sequences["S000000"]


# --- score_classifier ------------------------------------------------------------


def _classified(spec, n):
    data = simgen.generate(spec, n)
    seqs, _ = ingest_cycle_times(data.cycle_csv, boundary_action=spec.boundary_action)
    reports, _ = parse_error_reports(data.error_csv)
    return data, classify_dataset(seqs, reports)


def test_perfect_classifier_scores_identity_confusion():
    spec = _spec()
    data, report = _classified(spec, 400)
    card = simgen.score_classifier(data.truth, report)
    for truth_cls, row in card.confusion.items():
        for predicted, count in row.items():
            if truth_cls != predicted and count:
                pytest.fail(f"off-diagonal {truth_cls}->{predicted}: {count}")
    assert card.accuracy == 1.0


def test_all_normal_predictor_scores_normal_fraction():
    spec = _spec()
    data = simgen.generate(spec, 300)
    labels = {
        sid: SequenceLabel(sid, SequenceClass.NORMAL) for sid in data.truth.sequences
    }
    fake = ClassificationReport(
        labels=labels, fractions={}, outlier_removed_count=0,
        fits={}, significance={}, specs={}, global_max={},
    )
    card = simgen.score_classifier(data.truth, fake)
    normal_fraction = data.truth.class_counts().get("normal", 0) / 300
    assert card.accuracy == pytest.approx(normal_fraction)


def test_id_mismatch_raises():
    data = simgen.generate(_spec(), 10)
    fake = ClassificationReport(
        labels={"OTHER": SequenceLabel("OTHER", SequenceClass.NORMAL)},
        fractions={}, outlier_removed_count=0, fits={}, significance={},
        specs={}, global_max={},
    )
    with pytest.raises(IdMismatch):
        simgen.score_classifier(data.truth, fake)
