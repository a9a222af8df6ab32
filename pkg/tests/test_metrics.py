import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from knockon.errors import DegenerateK, EmptyInput
from knockon.metrics import (
    Crossover,
    compute_report,
    crossover_tau,
    cta,
    cta_curve,
    estimate_k,
    f1_per_step,
    f1_pooled,
    format_pct,
    global_max_mask,
    nominal_baseline,
    render_cta_svg,
    rmse_per_step,
    step_weights,
    tarmse,
    tau_sweep,
)


# --- rmse_per_step ---------------------------------------------------------------


def test_rmse_perfect_predictions():
    preds = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert rmse_per_step(preds, preds) == [0.0, 0.0]


def test_rmse_constant_error():
    targets = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert rmse_per_step(targets + 2.0, targets) == [pytest.approx(2.0), pytest.approx(2.0)]


def test_rmse_three_sample_fixture_matches_direct_arithmetic():
    preds = np.array([[1.0], [2.0], [4.0]])
    targets = np.array([[0.0], [5.0], [3.0]])
    expected = math.sqrt((1.0 + 9.0 + 1.0) / 3.0)
    assert rmse_per_step(preds, targets) == [pytest.approx(expected)]


def test_rmse_all_masked_step_is_missing():
    preds = np.zeros((3, 2))
    targets = np.ones((3, 2))
    mask = np.array([[True, False]] * 3)
    result = rmse_per_step(preds, targets, mask)
    assert result[0] == pytest.approx(1.0)
    assert result[1] is None


def test_rmse_mask_excludes_entries():
    preds = np.array([[0.0], [0.0]])
    targets = np.array([[1.0], [100.0]])
    mask = np.array([[True], [False]])
    assert rmse_per_step(preds, targets, mask) == [pytest.approx(1.0)]


# --- estimate_k --------------------------------------------------------------------


def test_estimate_k_single_action_pair():
    assert estimate_k({"a": [3.0, 5.0]}, d_max=10.0) == pytest.approx(1.0)


def test_estimate_k_identical_durations_is_degenerate_zero():
    assert estimate_k({"a": [4.0, 4.0, 4.0]}, d_max=10.0) == 0.0


def test_estimate_k_filters_above_d_max():
    # The 100.0 outlier must not contribute.
    k = estimate_k({"a": [3.0, 5.0, 100.0]}, d_max=10.0)
    assert k == pytest.approx(1.0)


def test_estimate_k_pools_across_actions():
    k = estimate_k({"a": [3.0, 5.0], "b": [7.0, 7.0]}, d_max=10.0)
    assert k == pytest.approx(math.sqrt((1.0 + 1.0 + 0.0 + 0.0) / 4.0))


def test_estimate_k_empty_raises():
    with pytest.raises(EmptyInput):
        estimate_k({"a": [50.0]}, d_max=10.0)


def test_estimate_k_recovers_generator_noise_scale():
    from knockon import simgen
    from knockon.ingest import ingest_cycle_times

    spec = simgen.default_line_spec(seed=5, source_rate=0.0, misc_rate=0.0)
    data = simgen.generate(spec, 2000)
    seqs, _ = ingest_cycle_times(data.cycle_csv, boundary_action=spec.boundary_action)
    durations: dict[str, list[float]] = {}
    for s in seqs:
        for t in s.tuples:
            if t.key.action_id != spec.boundary_action:
                durations.setdefault(t.key.action_id, []).append(t.duration)
    d_max = {a.action_id: a.nominal + 5.0 for a in spec.actions}
    k = estimate_k(durations, d_max)
    jitter = spec.actions[0].jitter_sd  # same for every action in the default line
    assert abs(k - jitter) / jitter < 0.10


# --- tarmse --------------------------------------------------------------------------


def test_tarmse_reference_row_two_steps():
    # hand-derived from the weighting formula with k = 5.14
    assert tarmse([2.95, 3.29], 5.14) == pytest.approx(0.41, abs=0.005)
    assert tarmse([4.14, 4.12], 5.14) == pytest.approx(0.20, abs=0.005)


def test_tarmse_perfect_predictor_is_exactly_one():
    assert tarmse([0.0, 0.0, 0.0], 5.14) == pytest.approx(1.0, abs=1e-15)


def test_tarmse_degenerate_k_raises():
    with pytest.raises(DegenerateK):
        tarmse([1.0], 0.0)


def test_tarmse_rejects_missing_steps():
    with pytest.raises(ValueError):
        tarmse([1.0, None], 5.14)


def test_tarmse_weights_are_normalized_exponentials():
    w = step_weights(3)
    assert w == pytest.approx(np.exp(-np.array([1.0, 2.0, 3.0])))
    # closed form S(n) = (e^-n - 1) / (1 - e)
    n = 3
    assert w.sum() == pytest.approx((math.exp(-n) - 1.0) / (1.0 - math.e))


@given(
    st.lists(st.floats(min_value=0.0, max_value=5.0), min_size=1, max_size=7),
    st.integers(min_value=0, max_value=6),
)
def test_tarmse_strictly_increases_when_any_rmse_drops(rmse, which):
    k = 6.0
    which = which % len(rmse)
    improved = list(rmse)
    improved[which] = improved[which] * 0.5 - 0.01
    if improved[which] < 0:
        improved[which] = rmse[which] - 0.01 if rmse[which] > 0.01 else -0.01
    base = tarmse(rmse, k)
    better = tarmse(improved, k)
    assert better > base


@given(st.lists(st.floats(min_value=0.0, max_value=100.0), min_size=1, max_size=7))
def test_tarmse_at_most_one_with_equality_iff_zero_error(rmse):
    value = tarmse(rmse, 5.14)
    assert value <= 1.0 + 1e-12
    if all(r == 0.0 for r in rmse):
        assert value == pytest.approx(1.0)
    elif any(r > 1e-9 for r in rmse):  # below that, k - r rounds to k in float64
        assert value < 1.0


# --- f1 ---------------------------------------------------------------------------


def test_f1_identical_predictions_score_one_where_positives_exist():
    targets = np.array([[10.0, 30.0], [10.0, 30.0], [20.0, 30.0]])
    nominals = np.full_like(targets, 10.0)
    assert f1_per_step(targets, targets, nominals, b=0.1) == [1.0, 1.0]


def test_f1_zero_recall_scores_zero():
    targets = np.array([[20.0], [20.0]])
    preds = np.array([[10.0], [10.0]])
    nominals = np.full_like(targets, 10.0)
    assert f1_per_step(preds, targets, nominals, b=0.1) == [0.0]


def test_f1_confusion_fixture():
    # 8 samples at one step: 2 TP, 1 FP, 1 FN, 4 TN -> F1 = 2*2/(2*2+1+1)
    nominals = np.full((8, 1), 10.0)
    targets = np.array([[20.0], [20.0], [10.0], [20.0], [10.0], [10.0], [10.0], [10.0]])
    preds = np.array([[20.0], [20.0], [20.0], [10.0], [10.0], [10.0], [10.0], [10.0]])
    assert f1_per_step(preds, targets, nominals, b=0.1) == [pytest.approx(2 * 2 / 6)]


def test_f1_no_positives_defined_as_zero():
    flat = np.full((4, 1), 10.0)
    assert f1_per_step(flat, flat, flat, b=0.1) == [0.0]


@given(st.floats(min_value=0.1, max_value=50.0))
def test_f1_invariant_under_uniform_rescaling(scale):
    targets = np.array([[20.0, 9.0], [11.5, 30.0], [10.0, 10.0]])
    preds = np.array([[19.0, 12.0], [10.0, 28.0], [10.5, 9.0]])
    nominals = np.full_like(targets, 10.0)
    base = f1_per_step(preds, targets, nominals, b=0.1)
    scaled = f1_per_step(preds * scale, targets * scale, nominals * scale, b=0.1)
    assert scaled == base


def test_f1_pooled_aggregates_steps():
    nominals = np.full((2, 2), 10.0)
    targets = np.array([[20.0, 10.0], [10.0, 20.0]])
    preds = np.array([[20.0, 10.0], [10.0, 10.0]])
    # pooled: TP=1, FN=1, FP=0 -> 2/(2+0+1)
    assert f1_pooled(preds, targets, nominals, b=0.1) == pytest.approx(2 / 3)


# --- cta and tau sweep ---------------------------------------------------------------


def test_cta_reference_value():
    assert cta(0.41, 0.80, 0.5) == pytest.approx(0.605)
    assert format_pct(cta(0.41, 0.80, 0.5)) == "60.50%"


def test_cta_tau_zero_is_f1():
    assert cta(0.3, 0.9, 0.0) == 0.9


def test_cta_tau_one_is_tarmse():
    assert cta(0.3, 0.9, 1.0) == 0.3


def test_cta_rejects_tau_outside_unit_interval():
    with pytest.raises(ValueError):
        cta(0.3, 0.9, 1.5)


def test_crossover_reference_pairs():
    assert crossover_tau((0.48, 0.80), (0.21, 0.88)) == pytest.approx(0.2286, abs=1e-4)
    assert crossover_tau((0.48, 0.80), (0.21, 0.92)) == pytest.approx(0.3077, abs=1e-4)


def test_crossover_identical_models_is_none():
    assert crossover_tau((0.3, 0.9), (0.3, 0.9)) is None


def test_crossover_dominated_pair_outside_unit_interval():
    sweep = tau_sweep({"a": (0.5, 0.9), "b": (0.3, 0.8)})  # a dominates b
    assert sweep == []


def test_tau_sweep_reports_inside_unit_interval():
    sweep = tau_sweep({"tf": (0.48, 0.80), "gru": (0.21, 0.88)})
    assert sweep == [Crossover("tf", "gru", pytest.approx(0.2286, abs=1e-4))]


def test_tau_sweep_needs_two_models():
    with pytest.raises(ValueError):
        tau_sweep({"only": (0.3, 0.9)})


_score_grid = st.integers(min_value=0, max_value=1000).map(lambda v: v / 1000.0)


@given(
    st.tuples(_score_grid, _score_grid),
    st.tuples(_score_grid, _score_grid),
)
def test_crossover_matches_fine_grid(a, b):
    # scores live on a millimetre grid so the linear-in-tau arithmetic is
    # well conditioned; subnormal separations are not a meaningful input
    tau_star = crossover_tau(a, b)
    if tau_star is None or not 0.0 <= tau_star <= 1.0:
        return
    taus = np.arange(0.0, 1.0001, 0.001)
    diffs = np.array([cta(*a, t) - cta(*b, t) for t in taus])
    sign_changes = np.where(np.diff(np.sign(diffs)) != 0)[0]
    if len(sign_changes):
        grid_tau = taus[sign_changes[0]]
        assert abs(grid_tau - tau_star) <= 1e-3 + 1e-9
    else:
        # curves touch without crossing inside the grid resolution
        assert np.abs(diffs).min() < 1e-6 or tau_star in (0.0, 1.0)


# --- report and helpers ----------------------------------------------------------


def test_compute_report_composite_identity():
    preds = np.array([[10.0, 12.0], [11.0, 29.0]])
    targets = np.array([[10.0, 12.0], [12.0, 30.0]])
    nominals = np.full_like(targets, 10.0)
    report = compute_report(preds, targets, nominals=nominals, k=5.14, tau=0.4, b=0.1)
    assert report.cta == pytest.approx(
        0.4 * report.tarmse + 0.6 * report.f1_mean, abs=1e-12
    )


def test_nominal_baseline_lookup():
    codes = np.array([[0, 1], [1, 0]])
    base = nominal_baseline(codes, {0: 10.0, 1: 20.0})
    assert base.tolist() == [[10.0, 20.0], [20.0, 10.0]]


def test_global_max_mask():
    raw = np.array([[5.0, 500.0]])
    codes = np.array([[0, 0]])
    mask = global_max_mask(raw, codes, {0: 100.0})
    assert mask.tolist() == [[True, False]]


def test_cta_curve_endpoints():
    points = cta_curve((0.4, 0.9), [0.0, 1.0])
    assert points == [(0.0, 0.9), (1.0, 0.4)]


def test_render_cta_svg_is_deterministic_and_wellformed():
    scores = {"gru": (0.21, 0.88), "tf": (0.48, 0.80)}
    svg_a = render_cta_svg(scores)
    svg_b = render_cta_svg(scores)
    assert svg_a == svg_b
    assert svg_a.startswith("<svg") and svg_a.endswith("</svg>")
    assert svg_a.count("<polyline") == 2
