"""Label delayed actions as source or knock-on errors.

The labelling works per action: integer-truncated durations are counted
into a histogram, a Gaussian is fitted with its mean pinned to the mode,
and any other bin whose empirical frequency beats the fitted density is a
significant delay. A significant delay covered by a logged error report in
the same station is a source error; one without a report is a knock-on
error. Sequences with a duration beyond ten times the allowed maximum are
misc (pauses, manual interventions) and are excluded from the fit.
"""

from knockon import simgen
from knockon.classify import classify_dataset, histogram_from_durations, histogram_dump_rows
from knockon.ingest import ingest_cycle_times, parse_error_reports

spec = simgen.default_line_spec(seed=11)
data = simgen.generate(spec, n_sequences=2000)

sequences, diags = ingest_cycle_times(data.cycle_csv, boundary_action=spec.boundary_action)
reports, _ = parse_error_reports(data.error_csv)
print(f"ingested {len(sequences)} sequences, {len(reports)} error reports, "
      f"{len(diags)} diagnostics")

result = classify_dataset(sequences, reports)
print()
print("class fractions:")
for name, fraction in result.fractions.items():
    print(f"    {name:22s} {100 * fraction:6.2f}%")
print(f"outlier sequences removed before fitting: {result.outlier_removed_count}")

# How well did we do against the generator's ground truth?
card = simgen.score_classifier(data.truth, result)
print()
print(card)

# Peek at one action's histogram with its density threshold.
key = next(k for k in result.significance if k.action_id == "A02")
sig = result.significance[key]
durations = [
    t.duration
    for s in sequences
    if result.labels[s.sequence_id].cls.value != "misc"
    for t in s.tuples
    if t.key == key
]
hist = histogram_from_durations(key, durations)
print()
print(f"duration histogram for {key.action_id} "
      f"(mode {sig.mode}s, sigma {result.fits[key].sigma:.2f}s):")
print(f"    {'bin':>5} {'count':>6} {'frequency':>10} {'density':>10}  flagged")
for row in histogram_dump_rows(hist, sig):
    if row["count"] < 3 and not row["flagged"]:
        continue  # skip stray jitter bins for readability
    print(f"    {row['duration']:>5} {row['count']:>6} {row['frequency']:>10.4f} "
          f"{row['density']:>10.4f}  {'<-- significant' if row['flagged'] else ''}")
