"""Train a small recurrent forecaster on windowed cycle-time features.

Labelled sequences become sliding windows of five feature rows
[time, action code, duration, error type, error count], each predicting
the durations of the next two actions. Everything is scaled into [-1, 1]
with statistics from the training split only; the 80/20 split is
chronological. The payoff of learning: once a source delay is visible in
the window, the decayed knock-on delays of the next actions are
predictable, which a per-action-nominal baseline cannot do.
"""

import numpy as np

from knockon import simgen
from knockon.classify import classify_dataset
from knockon.ingest import ingest_cycle_times, parse_error_reports
from knockon.metrics import nominal_baseline, rmse_per_step
from knockon.pipeline import (
    PipelineConfig,
    pairs_to_arrays,
    prepare_dataset,
    target_code_matrix,
    target_raw_matrix,
)
from knockon.seq2seq import ModelConfig, RnnSettings, TrainConfig, build_model, predict_dataset, train

spec = simgen.default_line_spec(
    seed=11,
    source_rate=0.2,
    source_delay=simgen.DelaySpec(20.0, 0.0),
    propagation=simgen.Propagation(horizon=4, decay=0.9),
    misc_rate=0.0,
)
data = simgen.generate(spec, n_sequences=1200)
sequences, _ = ingest_cycle_times(data.cycle_csv, boundary_action=spec.boundary_action)
reports, _ = parse_error_reports(data.error_csv)
labelled = classify_dataset(sequences, reports)

prep = prepare_dataset(
    sequences, labelled, PipelineConfig(n_back=5, m_fwd=2), boundary_action=spec.boundary_action
)
print(f"{len(prep.train)} training windows, {len(prep.test)} test windows")

train_x, train_y = pairs_to_arrays(prep.train)
test_x, _ = pairs_to_arrays(prep.test)
test_raw = target_raw_matrix(prep.test)

config = ModelConfig("gru", n_back=5, m_fwd=2, rnn=RnnSettings(32, 2, 0.1), seed=1)
model = build_model(config)
print(f"gru forecaster with {model.parameter_count()} parameters, 20 epochs...")
checkpoint = train(model, train_x, train_y, TrainConfig(epochs=20, seed=1),
                   normalization=prep.params)
print(f"train MAE {checkpoint.history['train_loss'][0]:.4f} -> "
      f"{checkpoint.history['train_loss'][-1]:.4f} (normalized)")

_, predicted_seconds = predict_dataset(checkpoint, test_x)
model_rmse = rmse_per_step(predicted_seconds, test_raw)

baseline = nominal_baseline(target_code_matrix(prep.test), prep.nominal_by_code)
baseline_rmse = rmse_per_step(baseline, test_raw)

print()
print("test RMSE per prediction step (seconds):")
print(f"    {'step':>4} {'baseline':>9} {'gru':>7} {'improvement':>12}")
for i, (b, m) in enumerate(zip(baseline_rmse, model_rmse), start=1):
    print(f"    {i:>4} {b:>9.2f} {m:>7.2f} {100 * (1 - m / b):>11.1f}%")
