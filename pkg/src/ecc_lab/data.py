"""Synthetic fine-grained feature datasets.

Class layout is a two-level Gaussian mixture: well-separated supercluster
centers, each surrounded by a handful of nearby subclass centers, with
per-sample noise tighter still. Classes inside one supercluster are
therefore genuinely confusable with each other while staying far from the
rest, which is what gives the similar-nontarget machinery something real
to find.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyClassError, InvalidShapeError, InvalidSpecError


@dataclass(frozen=True)
class SyntheticSpec:
    """Full description of one synthetic dataset."""

    num_superclusters: int
    subclasses_per_cluster: int
    input_dim: int
    samples_per_class_train: int
    samples_per_class_test: int
    sigma_super: float
    sigma_sub: float
    sigma_noise: float
    seed: int

    @property
    def num_classes(self) -> int:
        return self.num_superclusters * self.subclasses_per_cluster

    def validate(self) -> None:
        if self.num_superclusters < 1:
            raise InvalidSpecError("num_superclusters must be positive")
        if self.subclasses_per_cluster < 1:
            raise InvalidSpecError("subclasses_per_cluster must be positive")
        if self.num_classes < 2:
            raise InvalidSpecError(
                "num_superclusters * subclasses_per_cluster must be at least 2"
            )
        if self.input_dim < 1:
            raise InvalidSpecError("input_dim must be positive")
        if self.samples_per_class_train < 1:
            raise InvalidSpecError("samples_per_class_train must be positive")
        if self.samples_per_class_test < 1:
            raise InvalidSpecError("samples_per_class_test must be positive")
        if not self.sigma_noise > 0:
            raise InvalidSpecError("sigma_noise must be positive")
        if not self.sigma_super > self.sigma_sub > self.sigma_noise:
            raise InvalidSpecError(
                "need sigma_super > sigma_sub > sigma_noise for the fine-grained regime"
            )

    def to_json_file(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticSpec":
        try:
            return cls(
                num_superclusters=int(raw["num_superclusters"]),
                subclasses_per_cluster=int(raw["subclasses_per_cluster"]),
                input_dim=int(raw["input_dim"]),
                samples_per_class_train=int(raw["samples_per_class_train"]),
                samples_per_class_test=int(raw["samples_per_class_test"]),
                sigma_super=float(raw["sigma_super"]),
                sigma_sub=float(raw["sigma_sub"]),
                sigma_noise=float(raw["sigma_noise"]),
                seed=int(raw["seed"]),
            )
        except KeyError as exc:
            raise InvalidSpecError(f"spec is missing field {exc.args[0]!r}") from exc

    @classmethod
    def from_json_file(cls, path) -> "SyntheticSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Dataset:
    """Labeled samples for one split, tied to the spec that generated them."""

    inputs: np.ndarray  # (samples, input_dim)
    labels: np.ndarray  # (samples,)
    split: str  # "train" | "test"
    spec: SyntheticSpec

    @property
    def num_classes(self) -> int:
        return self.spec.num_classes


def generate(spec: SyntheticSpec) -> tuple[Dataset, Dataset]:
    """Draw train and test splits from identical subclass centers.

    Train and test share the class geometry and differ only in the sample
    noise, so a train/test gap cleanly measures overfitting. The draw order
    is fixed, making the output a pure function of the spec.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    g, c, d = spec.num_superclusters, spec.subclasses_per_cluster, spec.input_dim
    n = spec.num_classes
    super_centers = rng.normal(0.0, spec.sigma_super, size=(g, d))
    sub_centers = np.repeat(super_centers, c, axis=0) + rng.normal(
        0.0, spec.sigma_sub, size=(n, d)
    )
    n_train, n_test = spec.samples_per_class_train, spec.samples_per_class_test
    train_blocks = []
    test_blocks = []
    for y in range(n):
        block = sub_centers[y] + rng.normal(
            0.0, spec.sigma_noise, size=(n_train + n_test, d)
        )
        train_blocks.append(block[:n_train])
        test_blocks.append(block[n_train:])
    train = Dataset(
        inputs=np.vstack(train_blocks),
        labels=np.repeat(np.arange(n), n_train),
        split="train",
        spec=spec,
    )
    test = Dataset(
        inputs=np.vstack(test_blocks),
        labels=np.repeat(np.arange(n), n_test),
        split="test",
        spec=spec,
    )
    return train, test


def class_centroids(dataset: Dataset) -> np.ndarray:
    """Empirical per-class centroid of the dataset inputs."""
    n = dataset.num_classes
    centroids = np.empty((n, dataset.inputs.shape[1]))
    for y in range(n):
        rows = dataset.inputs[dataset.labels == y]
        if rows.shape[0] == 0:
            raise EmptyClassError(f"class {y} has no samples")
        centroids[y] = rows.mean(axis=0)
    return centroids


def class_affinity_oracle(dataset: Dataset) -> np.ndarray:
    """Nearest other class by input-space centroid distance, per class.

    Ground truth for what a trained similarity matrix ought to recover;
    ties break toward the lowest index.
    """
    if dataset.num_classes < 2:
        raise InvalidShapeError("need at least 2 classes")
    centroids = class_centroids(dataset)
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist2 = np.sum(diff * diff, axis=2)
    np.fill_diagonal(dist2, np.inf)
    return np.argmin(dist2, axis=1)


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Write `label,x0,...,x{dim-1}` rows; floats use repr for exact round trips."""
    dim = dataset.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"x{i}" for i in range(dim)])
        for label, row in zip(dataset.labels, dataset.inputs):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def read_dataset_csv(path, spec: SyntheticSpec, split: str) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["label"] + [f"x{i}" for i in range(spec.input_dim)]
        if header != expected:
            raise InvalidSpecError(f"unexpected CSV header in {path}")
        labels = []
        rows = []
        for record in reader:
            labels.append(int(record[0]))
            rows.append([float(v) for v in record[1:]])
    return Dataset(
        inputs=np.asarray(rows, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        split=split,
        spec=spec,
    )


def save_dataset(train: Dataset, test: Dataset, out_dir) -> None:
    """Write train.csv, test.csv, and the spec.json sidecar into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(train, out / "train.csv")
    write_dataset_csv(test, out / "test.csv")
    train.spec.to_json_file(out / "spec.json")


def load_dataset(data_dir) -> tuple[Dataset, Dataset]:
    """Read back a directory written by save_dataset."""
    data = Path(data_dir)
    spec = SyntheticSpec.from_json_file(data / "spec.json")
    train = read_dataset_csv(data / "train.csv", spec, "train")
    test = read_dataset_csv(data / "test.csv", spec, "test")
    return train, test
