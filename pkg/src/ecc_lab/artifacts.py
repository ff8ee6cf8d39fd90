"""Run-directory serialization: model/bank JSON, log CSVs, manifest, reports.

Floats go through repr (json does this natively), which round-trips
float64 exactly and keeps repeated runs byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .bank import CenterBank, CenterSnapshot
from .errors import InvalidShapeError
from .metrics import GeometryReport, SoftLabelReport
from .mlp import MlpModel
from .train import TrainLog

TRAINLOG_COLUMNS = [
    "epoch",
    "lr",
    "ce",
    "mcc",
    "clg",
    "total",
    "train_accuracy",
    "test_accuracy",
    "center_drift",
    "recovery_rate",
]


def save_model(model: MlpModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()) + "\n")


def load_model(path) -> MlpModel:
    return MlpModel.from_dict(json.loads(Path(path).read_text()))


def bank_to_dict(bank: CenterBank) -> dict:
    return {
        "num_classes": bank.num_classes,
        "feature_dim": bank.feature_dim,
        "rng_seed": bank.rng_seed,
        "counters": bank.counters.tolist(),
        "center_features": bank.center_features.tolist(),
        "center_logits": bank.center_logits.tolist(),
    }


def bank_from_dict(raw: dict) -> CenterBank:
    bank = CenterBank(raw["num_classes"], raw["feature_dim"], raw["rng_seed"])
    features = np.asarray(raw["center_features"], dtype=np.float64)
    logits = np.asarray(raw["center_logits"], dtype=np.float64)
    counters = np.asarray(raw["counters"], dtype=np.int64)
    if (
        features.shape != bank.center_features.shape
        or logits.shape != bank.center_logits.shape
        or counters.shape != bank.counters.shape
    ):
        raise InvalidShapeError("serialized bank arrays do not match declared sizes")
    bank.center_features = features
    bank.center_logits = logits
    bank.counters = counters
    return bank


def save_bank(bank: CenterBank, path) -> None:
    Path(path).write_text(json.dumps(bank_to_dict(bank)) + "\n")


def load_bank(path) -> CenterBank:
    return bank_from_dict(json.loads(Path(path).read_text()))


def write_trainlog_csv(log: TrainLog, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAINLOG_COLUMNS)
        for record in log.records:
            row = asdict(record)
            writer.writerow(
                [record.epoch] + [repr(float(row[c])) for c in TRAINLOG_COLUMNS[1:]]
            )


def write_snapshot_csv(snapshot: CenterSnapshot, path) -> None:
    """One row per class: class index followed by the center feature values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for y, row in enumerate(snapshot.center_features):
            writer.writerow([y] + [repr(float(v)) for v in row])


def write_snapshots(snapshots: list[CenterSnapshot], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for snap in snapshots:
        write_snapshot_csv(snap, out / f"epoch_{snap.epoch:04d}.csv")


def write_geometry_report(report: GeometryReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


def write_soft_label_report(report: SoftLabelReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


def write_pca_csv(coords: np.ndarray, labels: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "pc1", "pc2"])
        for label, (pc1, pc2) in zip(labels, coords):
            writer.writerow([int(label), repr(float(pc1)), repr(float(pc2))])


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
