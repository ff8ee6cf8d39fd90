"""Command-line entry point for reproducible runs.

Subcommands: gen-data, train, grad-check, inspect. Standard output carries
only each command's contracted result (for train, the final
`test_accuracy=` line); progress goes to standard error. Exit codes:
0 success, 2 bad input, 3 numeric failure during training, 4 gradient
check failure, 5 missing or corrupt artifacts.

The ECC_LAB_THREADS environment variable (default 1) caps internal
parallelism; it is applied to the BLAS thread-count variables before numpy
is first imported, so library imports stay inside the command functions.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_NUMERIC = 3
EXIT_GRADCHECK = 4
EXIT_MISSING = 5

CONFIG_KEYS = {
    "data",
    "preset",
    "lambda1",
    "lambda2",
    "batch_size",
    "epochs",
    "lr0",
    "momentum",
    "lr_decay_every",
    "lr_decay_factor",
    "reset_counters_each_epoch",
    "shuffle_seed",
    "model_seed",
    "bank_seed",
    "hidden_dims",
    "feature_dim",
}


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _configure_threads() -> int | None:
    raw = os.environ.get("ECC_LAB_THREADS", "1")
    try:
        threads = int(raw)
        if threads < 1:
            raise ValueError
    except ValueError:
        return _fail(f"ECC_LAB_THREADS must be a positive integer, got {raw!r}", EXIT_BAD_INPUT)
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, str(threads))
    return None


def _timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def cmd_gen_data(args: argparse.Namespace) -> int:
    from .data import SyntheticSpec, generate, save_dataset
    from .errors import InvalidSpecError

    spec_path = Path(args.spec)
    if not spec_path.is_file():
        return _fail(f"spec file not found: {spec_path}", EXIT_BAD_INPUT)
    try:
        spec = SyntheticSpec.from_json_file(spec_path)
        train, test = generate(spec)
    except (InvalidSpecError, json.JSONDecodeError, ValueError, TypeError) as exc:
        return _fail(f"invalid spec: {exc}", EXIT_BAD_INPUT)
    save_dataset(train, test, args.out)
    print(
        f"wrote {train.labels.shape[0]} train and {test.labels.shape[0]} test samples "
        f"({spec.num_classes} classes) to {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def _resolve_train_config(raw: dict, config_dir: Path) -> tuple[dict, "object"]:
    """Merge file values over shipped defaults; returns (resolved dict, TrainConfig)."""
    from .train import TrainConfig, load_presets

    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "data" not in raw:
        raise ValueError("config must name a dataset directory under 'data'")
    shipped = load_presets()
    resolved = dict(shipped["defaults"])
    for key, value in raw.items():
        if value is not None:
            resolved[key] = value
    preset = raw.get("preset")
    if preset in (None, "none"):
        preset = None
        if raw.get("lambda1") is None or raw.get("lambda2") is None:
            raise ValueError("lambda1 and lambda2 are required when no preset is given")
    else:
        if preset not in shipped["presets"]:
            raise ValueError(f"unknown preset {preset!r}")
        pinned = shipped["presets"][preset]
        for key in ("lambda1", "lambda2"):
            explicit = raw.get(key)
            if explicit is not None and float(explicit) != pinned[key]:
                raise ValueError(
                    f"{key}={explicit} conflicts with preset {preset} ({pinned[key]}); "
                    "presets pin the lambda weights"
                )
        resolved["lambda1"] = pinned["lambda1"]
        resolved["lambda2"] = pinned["lambda2"]
    resolved["preset"] = preset
    data_path = Path(resolved["data"])
    if not data_path.is_absolute():
        data_path = config_dir / data_path
    resolved["data"] = str(data_path)
    hidden = resolved["hidden_dims"]
    if not isinstance(hidden, list) or any(
        not isinstance(h, int) or h < 1 for h in hidden
    ):
        raise ValueError("hidden_dims must be a list of positive integers")
    if not isinstance(resolved["feature_dim"], int) or resolved["feature_dim"] < 1:
        raise ValueError("feature_dim must be a positive integer")
    cfg = TrainConfig(
        lambda1=float(resolved["lambda1"]),
        lambda2=float(resolved["lambda2"]),
        batch_size=int(resolved["batch_size"]),
        epochs=int(resolved["epochs"]),
        lr0=float(resolved["lr0"]),
        momentum=float(resolved["momentum"]),
        lr_decay_every=int(resolved["lr_decay_every"]),
        lr_decay_factor=float(resolved["lr_decay_factor"]),
        reset_counters_each_epoch=bool(resolved["reset_counters_each_epoch"]),
        shuffle_seed=int(resolved["shuffle_seed"]),
        preset=preset,
    )
    cfg.validate()
    return resolved, cfg


def _write_reports(out: Path, model, bank, test) -> None:
    from .artifacts import write_geometry_report, write_pca_csv, write_soft_label_report
    from .loss import build_similarity
    from .metrics import geometry_report, pca_project, soft_label_report

    features = model.forward(test.inputs).features
    write_geometry_report(geometry_report(features, test.labels), out / "geometry.json")
    sim = build_similarity(bank)
    write_soft_label_report(soft_label_report(bank, sim), out / "soft_labels.json")
    write_pca_csv(pca_project(features, k=2), test.labels, out / "pca.csv")


def cmd_train(args: argparse.Namespace) -> int:
    from . import __version__
    from .artifacts import (
        save_bank,
        save_model,
        write_manifest,
        write_snapshots,
        write_trainlog_csv,
    )
    from .bank import CenterBank
    from .data import load_dataset
    from .errors import DegenerateNormError, NonFiniteError
    from .mlp import MlpModel
    from .train import train

    config_path = Path(args.config)
    if not config_path.is_file():
        return _fail(f"config file not found: {config_path}", EXIT_BAD_INPUT)
    try:
        raw = json.loads(config_path.read_text())
        if not isinstance(raw, dict):
            raise ValueError("config must be a JSON object")
        resolved, cfg = _resolve_train_config(raw, config_path.resolve().parent)
    except (ValueError, json.JSONDecodeError) as exc:
        return _fail(f"invalid config: {exc}", EXIT_BAD_INPUT)

    data_dir = Path(resolved["data"])
    try:
        train_data, test_data = load_dataset(data_dir)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(f"cannot load dataset from {data_dir}: {exc}", EXIT_BAD_INPUT)

    out = Path(args.out)
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        return _fail(f"{out} already contains a manifest", EXIT_BAD_INPUT)
    out.mkdir(parents=True, exist_ok=True)

    n = train_data.num_classes
    layer_dims = (
        [train_data.spec.input_dim] + list(resolved["hidden_dims"]) + [resolved["feature_dim"], n]
    )
    manifest = {
        "tool_version": __version__,
        "config_path": str(config_path),
        "output_dir": str(out),
        "dataset_dir": str(data_dir),
        "synthetic_spec": asdict(train_data.spec),
        "train_config": {k: v for k, v in resolved.items() if k != "data"},
        "layer_dims": layer_dims,
        "seeds": {
            "data": train_data.spec.seed,
            "model": int(resolved["model_seed"]),
            "bank": int(resolved["bank_seed"]),
            "shuffle": cfg.shuffle_seed,
        },
        "started_at": _timestamp(),
        "finished_at": None,
        "status": "running",
    }
    write_manifest(manifest, manifest_path)

    model = MlpModel(layer_dims, seed=int(resolved["model_seed"]))
    bank = CenterBank(n, resolved["feature_dim"], seed=int(resolved["bank_seed"]))

    def progress(record):
        print(
            f"epoch {record.epoch:3d}  lr {record.lr:.6g}  total {record.total:.5f}  "
            f"train {record.train_accuracy:.4f}  test {record.test_accuracy:.4f}",
            file=sys.stderr,
        )

    try:
        log = train(model, train_data, bank, cfg, test_data=test_data, progress=progress)
    except (DegenerateNormError, NonFiniteError) as exc:
        manifest["finished_at"] = _timestamp()
        manifest["status"] = f"failed: {exc}"
        write_manifest(manifest, manifest_path)
        return _fail(str(exc), EXIT_NUMERIC)

    write_trainlog_csv(log, out / "trainlog.csv")
    save_model(model, out / "model.json")
    save_bank(bank, out / "bank.json")
    write_snapshots(bank.snapshots, out / "snapshots")
    _write_reports(out, model, bank, test_data)
    manifest["finished_at"] = _timestamp()
    manifest["status"] = "completed"
    write_manifest(manifest, manifest_path)
    print(f"test_accuracy={log.records[-1].test_accuracy!r}")
    return EXIT_OK


def cmd_grad_check(args: argparse.Namespace) -> int:
    from .gradcheck import CHECKS, run_suite

    if args.trials < 1:
        return _fail("--trials must be at least 1", EXIT_BAD_INPUT)
    report = run_suite(seed=args.seed, trials=args.trials)
    failed = []
    for name, (_check, tol) in CHECKS.items():
        status = "PASS" if report.passed(name) else "FAIL"
        print(f"{name:8s} max_rel_err={report.worst[name]:.3e}  tol={tol:.0e}  {status}")
        if not report.passed(name):
            failed.append(name)
    if failed:
        for name in failed:
            print(
                f"error: {name} gradient check failed at seed {report.worst_seed[name]}",
                file=sys.stderr,
            )
        return EXIT_GRADCHECK
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    from .artifacts import load_bank, load_model, read_manifest
    from .data import load_dataset
    from .errors import EccError
    from .train import evaluate

    run_dir = Path(args.run_dir)
    required = ["manifest.json", "model.json", "bank.json"]
    missing = [name for name in required if not (run_dir / name).is_file()]
    if missing:
        return _fail(f"{run_dir} is missing {', '.join(missing)}", EXIT_MISSING)
    try:
        manifest = read_manifest(run_dir / "manifest.json")
        model = load_model(run_dir / "model.json")
        bank = load_bank(run_dir / "bank.json")
        _train_data, test_data = load_dataset(Path(manifest["dataset_dir"]))
    except (OSError, ValueError, KeyError, json.JSONDecodeError, EccError) as exc:
        return _fail(f"corrupt or unreadable artifacts: {exc}", EXIT_MISSING)

    try:
        _write_reports(run_dir, model, bank, test_data)
    except EccError as exc:
        return _fail(f"cannot regenerate reports: {exc}", EXIT_MISSING)

    geometry = json.loads((run_dir / "geometry.json").read_text())
    soft = json.loads((run_dir / "soft_labels.json").read_text())
    accuracy, _ = evaluate(model, test_data)
    import numpy as np

    print(f"run: {run_dir}")
    print(f"test_accuracy={accuracy!r}")
    print(f"intra_class_variance={geometry['intra_class_variance']!r}")
    print(f"nearest_nontarget_margin={geometry['nearest_nontarget_margin']!r}")
    print(
        "mean_similar_confidence="
        f"{float(np.mean(soft['similar_confidence']))!r}"
    )
    print("reports: geometry.json soft_labels.json pca.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecc-lab",
        description="Synthetic-data laboratory for class-center loss training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset from a spec file")
    p.add_argument("--spec", required=True, help="path to a dataset spec JSON file")
    p.add_argument("--out", required=True, help="output directory for CSVs + sidecar")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run one training experiment from a config file")
    p.add_argument("--config", required=True, help="path to a run config JSON file")
    p.add_argument("--out", required=True, help="run directory to create")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grad-check", help="verify analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("inspect", help="regenerate reports for an existing run directory")
    p.add_argument("run_dir", help="run directory produced by the train command")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    code = _configure_threads()
    if code is not None:
        return code
    args = build_parser().parse_args(argv)
    return args.func(args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
