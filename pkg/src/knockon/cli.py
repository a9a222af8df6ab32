"""Command-line front end: generate, ingest, label, prep, train, eval, report.

Each subcommand reads its predecessor's artifact files and writes its own;
identical inputs and config produce byte-identical outputs. Exit codes:
0 success, 1 usage error, 2 data error (module diagnostics go to stderr as
JSON-lines).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics as M
from . import simgen
from .classify import ClassificationReport, classify_dataset, histogram_dump_rows
from .errors import KnockonError
from .ingest import HierarchySpec, ingest_cycle_times, parse_error_reports
from .pipeline import (
    NormalizationParams,
    PipelineConfig,
    WindowedPair,
    pairs_to_arrays,
    prepare_dataset,
    target_code_matrix,
    target_raw_matrix,
)
from .records import (
    DEFAULT_EPOCH,
    ActionKey,
    ActionSpec,
    SequenceClass,
    SequenceLabel,
    SignificantTuple,
    read_sequences,
    report_from_dict,
    report_to_dict,
    write_sequences,
)
from .seq2seq import (
    ModelConfig,
    RnnSettings,
    TrainConfig,
    TransformerSettings,
    build_model,
    load_checkpoint,
    predict_dataset,
    train,
)

SEED_ENV_VAR = "VMAS_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        raise UsageError(message)


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def load_config(path: str | None) -> dict:
    """Load a JSON or TOML config file; missing path means all defaults."""
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise KnockonError(f"config file not found: {p}")
    if p.suffix == ".toml":
        try:
            import tomllib  # Python 3.11+
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(p.read_text())
    return json.loads(p.read_text())


def resolve_seed(config: dict, flag_seed: int | None) -> int:
    """Flag beats env var beats config file beats 0."""
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return int(config.get("seed", 0))


def line_spec_from_dict(d: dict, seed: int) -> simgen.LineSpec:
    if not d:
        return simgen.default_line_spec(seed=seed)
    actions = tuple(
        simgen.ActionTemplate(a["action_id"], float(a["nominal"]), float(a.get("jitter_sd", 0.3)))
        for a in d["actions"]
    )
    source_delay = simgen.DelaySpec(**d.get("source_delay", {"mean": 25.0, "sd": 2.5}))
    propagation = simgen.Propagation(**d.get("propagation", {"horizon": 3, "decay": 0.55}))
    kwargs = {
        k: d[k]
        for k in (
            "boundary_action",
            "boundary_nominal",
            "boundary_jitter_sd",
            "source_rate",
            "misc_rate",
            "misc_scale",
            "global_mult",
            "vehicle_code",
            "inter_sequence_gap_s",
        )
        if k in d
    }
    return simgen.LineSpec(
        station=d["station"],
        actions=actions,
        source_delay=source_delay,
        propagation=propagation,
        seed=seed,
        **kwargs,
    )


def pipeline_config_from_dict(d: dict) -> PipelineConfig:
    return PipelineConfig(**{k: d[k] for k in (
        "n_back", "m_fwd", "separate", "outlier_mode", "global_mult",
        "split_fraction", "legacy_norm", "keep_misc",
    ) if k in d})


def model_config_from_dict(d: dict, *, n_back: int, m_fwd: int, seed: int) -> ModelConfig:
    rnn = RnnSettings(**d.get("rnn", {}))
    transformer = TransformerSettings(**d.get("transformer", {}))
    return ModelConfig(
        arch=d.get("arch", "gru"),
        n_back=n_back,
        m_fwd=m_fwd,
        rnn=rnn,
        transformer=transformer,
        seed=seed,
    )


def train_config_from_dict(d: dict, seed: int) -> TrainConfig:
    kwargs = {k: d[k] for k in ("epochs", "batch_size", "learning_rate", "val_fraction") if k in d}
    return TrainConfig(seed=seed, **kwargs)


# --- artifact readers/writers -------------------------------------------------


def _write_labels(report: ClassificationReport, seqs_by_id: dict, path: Path) -> None:
    with path.open("w") as fh:
        for sequence_id, label in report.labels.items():
            seq = seqs_by_id[sequence_id]
            significant = [
                {
                    "index": f.index,
                    "action_id": seq.tuples[f.index].key.action_id,
                    "duration": seq.tuples[f.index].duration,
                    "matched_error_ids": list(f.matched_error_ids),
                }
                for f in label.significant
            ]
            fh.write(
                json.dumps(
                    {
                        "sequence_id": sequence_id,
                        "class": label.cls.value,
                        "significant": significant,
                    },
                    separators=(",", ":"),
                )
            )
            fh.write("\n")


def _read_labels(path: Path) -> dict[str, SequenceLabel]:
    labels: dict[str, SequenceLabel] = {}
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            significant = tuple(
                SignificantTuple(
                    index=s["index"],
                    kind="source" if s["matched_error_ids"] else "knockon",
                    matched_error_ids=tuple(s["matched_error_ids"]),
                )
                for s in d["significant"]
            )
            matched = tuple(e for s in significant for e in s.matched_error_ids)
            labels[d["sequence_id"]] = SequenceLabel(
                d["sequence_id"], SequenceClass(d["class"]), significant, matched
            )
    return labels


def _write_label_meta(report: ClassificationReport, path: Path) -> None:
    actions = []
    for key, spec in report.specs.items():
        fit = report.fits.get(key)
        actions.append(
            {
                "station": key.station,
                "vehicle_code": key.vehicle_code,
                "action_id": key.action_id,
                "d_nominal": spec.d_nominal,
                "d_max": spec.d_max,
                "global_max": report.global_max[key],
                "mu": fit.mu if fit else None,
                "sigma": fit.sigma if fit else None,
            }
        )
    actions.sort(key=lambda a: (a["station"], a["vehicle_code"], a["action_id"]))
    _json_dump({"actions": actions}, path)


def _report_from_artifacts(labels: dict[str, SequenceLabel], meta: dict) -> ClassificationReport:
    """Minimal ClassificationReport reconstructed from label artifacts."""
    specs: dict[ActionKey, ActionSpec] = {}
    global_max: dict[ActionKey, float] = {}
    for a in meta["actions"]:
        key = ActionKey(a["station"], a["vehicle_code"], a["action_id"])
        specs[key] = ActionSpec(key, d_max=a["d_max"], d_nominal=a["d_nominal"])
        global_max[key] = a["global_max"]
    n = len(labels)
    fractions = {cls.value: 0.0 for cls in SequenceClass}
    for label in labels.values():
        fractions[label.cls.value] += 1.0 / n if n else 0.0
    return ClassificationReport(
        labels=labels,
        fractions=fractions,
        outlier_removed_count=0,
        fits={},
        significance={},
        specs=specs,
        global_max=global_max,
    )


def _write_windows(pairs: Sequence[WindowedPair], path: Path) -> None:
    with path.open("w") as fh:
        for p in pairs:
            fh.write(
                json.dumps(
                    {
                        "x": [[float(v) for v in row] for row in p.x],
                        "y": [float(v) for v in p.y],
                        "meta": {
                            "sequence_id": p.sequence_id,
                            "start": p.start,
                            "target_codes": [int(c) for c in p.target_codes],
                            "target_raw": [float(v) for v in p.target_raw],
                        },
                    },
                    separators=(",", ":"),
                )
            )
            fh.write("\n")


def _read_windows(path: Path) -> list[WindowedPair]:
    pairs: list[WindowedPair] = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            meta = d["meta"]
            pairs.append(
                WindowedPair(
                    x=np.asarray(d["x"], dtype=float),
                    y=np.asarray(d["y"], dtype=float),
                    sequence_id=meta["sequence_id"],
                    start=int(meta["start"]),
                    target_codes=np.asarray(meta["target_codes"], dtype=int),
                    target_raw=np.asarray(meta["target_raw"], dtype=float),
                )
            )
    return pairs


def _emit_diagnostics(diags, stream=None) -> None:
    stream = stream or sys.stderr
    for d in diags:
        if hasattr(d, "to_json"):
            stream.write(d.to_json())
        else:
            stream.write(json.dumps({"row": None, "kind": "Diagnostic", "detail": str(d)}))
        stream.write("\n")


# --- subcommands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    config = load_config(args.config)
    seed = resolve_seed(config, args.seed)
    spec_dict = load_config(args.spec) if args.spec else config.get("line_spec", {})
    spec = line_spec_from_dict(spec_dict, seed)
    data = simgen.generate(spec, args.n)
    paths = simgen.write_outputs(data, args.out_dir)
    print(json.dumps({"written": paths, "sequences": args.n}, sort_keys=True))
    return 0


def cmd_ingest(args) -> int:
    config = load_config(args.config)
    boundary = args.boundary_action or config.get("boundary_action", "CYCLE")
    hierarchy = HierarchySpec(frozenset(config.get("superordinate_ids", [])))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    seqs, diags = ingest_cycle_times(
        Path(args.cycle_times).read_text(), boundary_action=boundary, hierarchy=hierarchy
    )
    reports, rdiags = parse_error_reports(Path(args.error_reports).read_text())
    _emit_diagnostics(diags + rdiags)

    with (out / "sequences.jsonl").open("w") as fh:
        write_sequences(seqs, fh)
    with (out / "errors.jsonl").open("w") as fh:
        for r in reports:
            fh.write(json.dumps(report_to_dict(r), separators=(",", ":")) + "\n")
    print(json.dumps({"sequences": len(seqs), "error_reports": len(reports),
                      "diagnostics": len(diags) + len(rdiags)}, sort_keys=True))
    return 0


def cmd_label(args) -> int:
    config = load_config(args.config)
    with Path(args.sequences).open() as fh:
        seqs = read_sequences(fh)
    reports = []
    with Path(args.errors).open() as fh:
        for line in fh:
            if line.strip():
                reports.append(report_from_dict(json.loads(line)))

    report = classify_dataset(seqs, reports, global_mult=float(config.get("global_mult", 10.0)))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seqs_by_id = {s.sequence_id: s for s in seqs}
    _write_labels(report, seqs_by_id, out / "labels.jsonl")
    _write_label_meta(report, out / "label_meta.json")
    summary = {
        "fractions": report.fractions,
        "outlier_removed_count": report.outlier_removed_count,
        "n_sequences": len(seqs),
    }
    _json_dump(summary, out / "label_summary.json")

    if args.dump_histograms:
        dump_dir = Path(args.dump_histograms)
        dump_dir.mkdir(parents=True, exist_ok=True)
        from .classify import histogram_from_durations

        # mirror the fit: only global-threshold outlier sequences are excluded
        durations: dict[ActionKey, list[float]] = {}
        for s in seqs:
            if any(t.duration > report.global_max[t.key] for t in s.tuples):
                continue
            for t in s.tuples:
                durations.setdefault(t.key, []).append(t.duration)
        for key, sig in report.significance.items():
            hist = histogram_from_durations(key, durations[key])
            rows = histogram_dump_rows(hist, sig)
            with (dump_dir / f"{key.action_id}.csv").open("w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=["duration", "count", "frequency", "density", "flagged"])
                writer.writeheader()
                writer.writerows(rows)

    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_prep(args) -> int:
    config = load_config(args.config)
    pipe_cfg = pipeline_config_from_dict(config.get("pipeline", {}))
    if args.preset:
        pipe_cfg = PipelineConfig.from_preset(args.preset, **{
            k: getattr(pipe_cfg, k) for k in (
                "separate", "outlier_mode", "global_mult", "split_fraction",
                "legacy_norm", "keep_misc",
            )
        })
    boundary = args.boundary_action or config.get("boundary_action", "CYCLE")

    with Path(args.sequences).open() as fh:
        seqs = read_sequences(fh)
    labels = _read_labels(Path(args.labels))
    meta = json.loads(Path(args.label_meta).read_text())
    report = _report_from_artifacts(labels, meta)

    prep = prepare_dataset(seqs, report, pipe_cfg, boundary_action=boundary)
    _emit_diagnostics(prep.diagnostics)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_windows(prep.train, out / "windows_train.jsonl")
    _write_windows(prep.test, out / "windows_test.jsonl")

    d_max_by_code = {}
    for a in meta["actions"]:
        code = prep.vocab.get(a["action_id"])
        if code is not None:
            d_max_by_code[str(code)] = a["d_max"]
    prep_meta = {
        "config": asdict(pipe_cfg),
        "epoch": config.get("epoch", DEFAULT_EPOCH),
        "normalization": prep.params.to_dict(),
        "vocab": prep.vocab,
        "nominal_by_code": {str(c): v for c, v in prep.nominal_by_code.items()},
        "global_max_by_code": {str(c): v for c, v in prep.global_max_by_code.items()},
        "d_max_by_code": d_max_by_code,
        "counts": {"train": len(prep.train), "test": len(prep.test)},
        "removed_outliers": prep.removed_outliers,
    }
    _json_dump(prep_meta, out / "prep_meta.json")
    print(json.dumps({"train": len(prep.train), "test": len(prep.test)}, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config)
    seed = resolve_seed(config, args.seed)
    meta = json.loads(Path(args.meta).read_text())
    pairs = _read_windows(Path(args.windows))
    if not pairs:
        raise KnockonError("training windows file is empty")
    x, y = pairs_to_arrays(pairs)

    n_back, m_fwd = x.shape[1], y.shape[1]
    model_dict = dict(config.get("model", {}))
    if args.arch:
        model_dict["arch"] = args.arch
    if args.n_back and args.n_back != n_back:
        raise KnockonError(f"--n-back {args.n_back} does not match windows ({n_back})")
    if args.m_fwd and args.m_fwd != m_fwd:
        raise KnockonError(f"--m-fwd {args.m_fwd} does not match windows ({m_fwd})")
    model_cfg = model_config_from_dict(model_dict, n_back=n_back, m_fwd=m_fwd, seed=seed)

    train_dict = dict(config.get("train", {}))
    if args.epochs is not None:
        train_dict["epochs"] = args.epochs
    if args.batch_size is not None:
        train_dict["batch_size"] = args.batch_size
    if args.lr is not None:
        train_dict["learning_rate"] = args.lr
    train_cfg = train_config_from_dict(train_dict, seed)

    model = build_model(model_cfg)
    normalization = NormalizationParams.from_dict(meta["normalization"])
    checkpoint = train(model, x, y, train_cfg, normalization=normalization)
    checkpoint.save(args.out)
    print(json.dumps({
        "arch": model_cfg.arch,
        "parameters": model.parameter_count(),
        "final_train_loss": checkpoint.history["train_loss"][-1],
        "checkpoint": str(args.out),
    }, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    config = load_config(args.config)
    metrics_cfg = config.get("metrics", {})
    tau = args.tau if args.tau is not None else float(metrics_cfg.get("tau", 0.5))
    b = args.b if args.b is not None else float(metrics_cfg.get("b", 0.1))
    pooled = args.pooled or bool(metrics_cfg.get("pooled_f1", False))

    checkpoint = load_checkpoint(args.checkpoint)
    pairs = _read_windows(Path(args.windows))
    if not pairs:
        raise KnockonError("evaluation windows file is empty")
    meta = json.loads(Path(args.meta).read_text())
    nominal_by_code = {int(c): v for c, v in meta["nominal_by_code"].items()}
    global_max_by_code = {int(c): v for c, v in meta["global_max_by_code"].items()}
    d_max_by_code = {int(c): v for c, v in meta.get("d_max_by_code", {}).items()}

    _, preds_s = predict_dataset(checkpoint, pairs)
    targets = target_raw_matrix(pairs)
    codes = target_code_matrix(pairs)
    nominals = M.nominal_baseline(codes, nominal_by_code)
    mask = M.global_max_mask(targets, codes, global_max_by_code)

    k = args.k if args.k is not None else metrics_cfg.get("k")
    if k is None:
        durations_by_action: dict[int, list[float]] = {}
        for row_codes, row_raw in zip(codes, targets):
            for c, v in zip(row_codes, row_raw):
                durations_by_action.setdefault(int(c), []).append(float(v))
        k = M.estimate_k(durations_by_action, {c: d_max_by_code.get(c, float("inf"))
                                               for c in durations_by_action})

    report = M.compute_report(
        preds_s, targets, nominals=nominals, k=float(k), mask=mask, tau=tau, b=b,
        pooled=pooled,
    )
    payload = {"name": args.name or Path(args.checkpoint).stem, **report.to_dict()}
    _json_dump(payload, Path(args.out))

    if args.csv:
        with Path(args.csv).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for i, r in enumerate(report.rmse, start=1):
                writer.writerow([f"rmse_{i}", "" if r is None else f"{r:.6f}"])
            for i, f in enumerate(report.f1, start=1):
                writer.writerow([f"f1_{i}", f"{f:.6f}"])
            writer.writerow(["tarmse", f"{report.tarmse:.6f}"])
            writer.writerow(["f1_mean", f"{report.f1_mean:.6f}"])
            writer.writerow(["cta_pct", f"{100 * report.cta:.2f}"])
    if args.svg:
        svg = M.render_cta_svg({payload["name"]: (report.tarmse, report.f1_mean)})
        Path(args.svg).write_text(svg)

    print(json.dumps({"name": payload["name"], "cta_pct": payload["cta_pct"]}, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    if args.replicate:
        return _cmd_report_replicate(args)
    if not args.metrics:
        raise UsageError("report needs --metrics files or --replicate")
    models = [json.loads(Path(p).read_text()) for p in args.metrics]
    n_steps = max(len(m["rmse_per_step"]) for m in models)
    lines = []
    header = ["metric"] + [m["name"] for m in models]
    lines.append("  ".join(f"{h:>12}" for h in header))
    for i in range(n_steps):
        row = [f"rmse_{i + 1}"]
        for m in models:
            steps = m["rmse_per_step"]
            row.append("" if i >= len(steps) or steps[i] is None else f"{steps[i]:.2f}")
        lines.append("  ".join(f"{v:>12}" for v in row))
    for i in range(n_steps):
        row = [f"f1_{i + 1}"]
        for m in models:
            steps = m["f1_per_step"]
            row.append("" if i >= len(steps) else f"{steps[i]:.2f}")
        lines.append("  ".join(f"{v:>12}" for v in row))
    for name, key, fmt in (
        ("tarmse", "tarmse", "{:.2f}"),
        ("f1", "f1_mean", "{:.2f}"),
        ("cta_pct", "cta", "{:.2f}"),
    ):
        row = [name]
        for m in models:
            value = m[key] * 100 if name == "cta_pct" else m[key]
            row.append(fmt.format(value))
        lines.append("  ".join(f"{v:>12}" for v in row))
    table = "\n".join(lines)
    print(table)
    if args.out:
        summary = {
            "models": [
                {k: m[k] for k in ("name", "rmse_per_step", "f1_per_step", "tarmse", "f1_mean", "cta", "k", "tau", "b")}
                for m in models
            ]
        }
        _json_dump(summary, Path(args.out))
    if args.svg:
        scores = {m["name"]: (m["tarmse"], m["f1_mean"]) for m in models}
        Path(args.svg).write_text(M.render_cta_svg(scores))
    return 0


def _cmd_report_replicate(args) -> int:
    """Recompute the weighted score and composite from published per-step rows."""
    spec = json.loads(Path(args.replicate).read_text())
    k = float(spec.get("k", 5.14))
    tau = float(spec.get("tau", 0.5))
    ok = True
    print(f"{'model':>12} {'tarmse':>8} {'reported':>9} {'delta':>7}   {'cta%':>7} {'reported':>9} {'delta':>7}")
    for m in spec["models"]:
        tw = M.tarmse(m["rmse"], k)
        f1_mean = m["f1_mean"] if "f1_mean" in m else float(np.mean(m["f1"]))
        composite = 100.0 * M.cta(tw, f1_mean, tau)
        d_tw = tw - m["reported_tarmse"]
        d_cta = composite - m["reported_cta_pct"]
        within = abs(d_tw) <= args.tol_tarmse and abs(d_cta) <= args.tol_cta
        ok = ok and within
        flag = "" if within else "  <-- outside tolerance"
        print(
            f"{m['name']:>12} {tw:8.4f} {m['reported_tarmse']:9.2f} {d_tw:+7.3f}   "
            f"{composite:7.2f} {m['reported_cta_pct']:9.2f} {d_cta:+7.2f}{flag}"
        )
    return 0 if ok else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="knockon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit synthetic cycle/error CSVs with ground truth")
    p.add_argument("--config")
    p.add_argument("--spec", help="line spec file (JSON/TOML)")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="parse CSVs into canonical sequence records")
    p.add_argument("--config")
    p.add_argument("--cycle-times", required=True)
    p.add_argument("--error-reports", required=True)
    p.add_argument("--boundary-action")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("label", help="classify sequences into normal/source/knock-on/misc")
    p.add_argument("--config")
    p.add_argument("--sequences", required=True)
    p.add_argument("--errors", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dump-histograms", help="directory for per-action histogram CSVs")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("prep", help="windowed, normalized train/test datasets")
    p.add_argument("--config")
    p.add_argument("--sequences", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--label-meta", required=True)
    p.add_argument("--boundary-action")
    p.add_argument("--preset", choices=["5-2", "5-5", "5-7", "7-5", "7-7"])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("train", help="train a seq2seq forecaster")
    p.add_argument("--config")
    p.add_argument("--windows", required=True)
    p.add_argument("--meta", required=True, help="prep_meta.json from the prep step")
    p.add_argument("--out", required=True)
    p.add_argument("--arch", choices=["gru", "lstm", "transformer"])
    p.add_argument("--n-back", type=int)
    p.add_argument("--m-fwd", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a windows file")
    p.add_argument("--config")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name")
    p.add_argument("--csv", help="also write per-step rows as CSV")
    p.add_argument("--svg", help="also write a composite-vs-tau SVG")
    p.add_argument("--tau", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--k", type=float)
    p.add_argument("--pooled", action="store_true",
                   help="micro-average the F1 term instead of the per-step mean")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="aggregate metric reports into one table")
    p.add_argument("--metrics", nargs="*")
    p.add_argument("--out")
    p.add_argument("--svg")
    p.add_argument("--replicate", help="JSON of per-step rows + reported values to recompute")
    p.add_argument("--tol-tarmse", type=float, default=0.01)
    p.add_argument("--tol-cta", type=float, default=0.5)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (KnockonError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(json.dumps({"row": None, "kind": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
