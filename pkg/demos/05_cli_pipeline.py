"""Drive the whole flow through the command-line interface.

Every stage is a subcommand that reads its predecessor's files and writes
its own, so any step can be rerun or swapped out. Identical inputs produce
byte-identical outputs; the single seed (flag, VMAS_SEED env var, or config
file) controls all randomness.
"""

import json
import shutil
import tempfile
from pathlib import Path

from knockon.cli import main

root = Path(tempfile.mkdtemp(prefix="knockon_demo_"))
config = root / "config.json"
config.write_text(json.dumps({
    "seed": 3,
    "model": {"rnn": {"nodes_per_layer": 24, "layers": 2, "dropout": 0.1}},
    "train": {"epochs": 10, "batch_size": 128},
    "metrics": {"tau": 0.5, "b": 0.1},
}))

stages = [
    ["generate", "--n", "800", "--seed", "3", "--out-dir", f"{root}/gen"],
    ["ingest",
     "--cycle-times", f"{root}/gen/cycle_times.csv",
     "--error-reports", f"{root}/gen/error_reports.csv",
     "--out-dir", f"{root}/ing"],
    ["label",
     "--sequences", f"{root}/ing/sequences.jsonl",
     "--errors", f"{root}/ing/errors.jsonl",
     "--out-dir", f"{root}/lab",
     "--dump-histograms", f"{root}/lab/histograms"],
    ["prep",
     "--sequences", f"{root}/ing/sequences.jsonl",
     "--labels", f"{root}/lab/labels.jsonl",
     "--label-meta", f"{root}/lab/label_meta.json",
     "--preset", "5-2",
     "--out-dir", f"{root}/prep"],
    ["train", "--config", str(config),
     "--windows", f"{root}/prep/windows_train.jsonl",
     "--meta", f"{root}/prep/prep_meta.json",
     "--arch", "gru", "--seed", "3",
     "--out", f"{root}/gru.ckpt"],
    ["eval", "--config", str(config),
     "--checkpoint", f"{root}/gru.ckpt",
     "--windows", f"{root}/prep/windows_test.jsonl",
     "--meta", f"{root}/prep/prep_meta.json",
     "--out", f"{root}/gru_metrics.json",
     "--csv", f"{root}/gru_metrics.csv",
     "--svg", f"{root}/gru_composite.svg"],
    ["report", "--metrics", f"{root}/gru_metrics.json",
     "--out", f"{root}/summary.json"],
]

for argv in stages:
    print(f"$ knockon {' '.join(argv)}")
    code = main(argv)
    if code != 0:
        raise SystemExit(f"stage {argv[0]} failed with exit code {code}")
    print()

print("artifacts:")
for path in sorted(root.rglob("*")):
    if path.is_file():
        print(f"    {path.relative_to(root)}  ({path.stat().st_size} bytes)")

shutil.rmtree(root)
print()
print("(temporary demo directory removed)")
