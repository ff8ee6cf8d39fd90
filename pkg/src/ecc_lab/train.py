"""Training loop: SGD with momentum under the combined loss.

Per batch: forward pass, rebuild the center similarity matrix, compute the
loss against the bank state from *before* this batch, backpropagate, apply
the momentum update, and only then fold the batch's forward-pass features
and logits into the bank, one sample at a time in batch order. Centers are
snapshotted at the end of every epoch for drift analysis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .bank import CenterBank, center_drift
from .data import Dataset, class_affinity_oracle
from .errors import (
    DegenerateNormError,
    NonFiniteError,
    ShapeMismatchError,
)
from .loss import Batch, build_similarity, final_loss
from .mlp import MlpModel


def load_presets() -> dict:
    """Shipped defaults and named (lambda1, lambda2) pairs."""
    with resources.files("ecc_lab").joinpath("presets.json").open() as fh:
        return json.load(fh)


PRESET_NAMES = ("AIR", "CUB", "CAR", "NAB", "iNat2018")


@dataclass(frozen=True)
class TrainConfig:
    lambda1: float
    lambda2: float
    batch_size: int = 32
    epochs: int = 40
    lr0: float = 0.05
    momentum: float = 0.9
    lr_decay_every: int = 15
    lr_decay_factor: float = 0.1
    reset_counters_each_epoch: bool = False
    shuffle_seed: int = 0
    preset: str | None = None

    def validate(self) -> None:
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda weights must be nonnegative")
        if self.batch_size < 1 or self.epochs < 1 or self.lr_decay_every < 1:
            raise ValueError("batch_size, epochs, lr_decay_every must be positive")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 < self.lr_decay_factor < 1.0:
            raise ValueError("lr_decay_factor must lie in (0, 1)")
        if self.preset is not None and self.preset not in PRESET_NAMES:
            raise ValueError(f"unknown preset {self.preset!r}")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "TrainConfig":
        """Build a config with the named pinned (lambda1, lambda2) pair."""
        presets = load_presets()["presets"]
        if name not in presets:
            raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
        lam = presets[name]
        cfg = cls(lambda1=lam["lambda1"], lambda2=lam["lambda2"], preset=name)
        if overrides:
            cfg = replace(cfg, **overrides)
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    ce: float
    mcc: float
    clg: float
    total: float
    train_accuracy: float
    test_accuracy: float
    center_drift: float
    recovery_rate: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.asarray([getattr(r, name) for r in self.records], dtype=np.float64)


def evaluate(model: MlpModel, data: Dataset) -> tuple[float, np.ndarray]:
    """Argmax accuracy and the true-by-predicted confusion count matrix."""
    state = model.forward(data.inputs)
    n = state.logits.shape[1]
    if data.labels.max() >= n:
        raise ShapeMismatchError(
            f"dataset has labels up to {int(data.labels.max())} but model emits {n} classes"
        )
    pred = np.argmax(state.logits, axis=1)
    confusion = np.zeros((n, n), dtype=np.int64)
    np.add.at(confusion, (data.labels, pred), 1)
    accuracy = float(np.trace(confusion) / data.labels.shape[0])
    return accuracy, confusion


def _check_shapes(model: MlpModel, data: Dataset, bank: CenterBank) -> None:
    if model.feature_dim != bank.feature_dim:
        raise ShapeMismatchError(
            f"model feature dim {model.feature_dim} != bank feature dim {bank.feature_dim}"
        )
    if model.num_classes != bank.num_classes:
        raise ShapeMismatchError(
            f"model classes {model.num_classes} != bank classes {bank.num_classes}"
        )
    if data.num_classes != model.num_classes:
        raise ShapeMismatchError(
            f"dataset classes {data.num_classes} != model classes {model.num_classes}"
        )
    if data.inputs.shape[1] != model.layer_dims[0]:
        raise ShapeMismatchError(
            f"dataset dim {data.inputs.shape[1]} != model input dim {model.layer_dims[0]}"
        )


def train(
    model: MlpModel,
    train_data: Dataset,
    bank: CenterBank,
    cfg: TrainConfig,
    test_data: Dataset | None = None,
    progress=None,
) -> TrainLog:
    """Train the model in place; the bank is updated and snapshotted in place.

    `progress`, if given, is called with each completed EpochRecord. The
    whole loop is single-threaded and bit-deterministic for fixed seeds.
    """
    cfg.validate()
    _check_shapes(model, train_data, bank)
    rng = np.random.default_rng(cfg.shuffle_seed)
    oracle = class_affinity_oracle(train_data)
    velocities_w = [np.zeros_like(w) for w in model.weights]
    velocities_b = [np.zeros_like(b) for b in model.biases]
    lr = cfg.lr0
    bank.snapshot(0)
    log = TrainLog()
    inputs, labels = train_data.inputs, train_data.labels
    n_samples = labels.shape[0]

    for epoch in range(1, cfg.epochs + 1):
        if cfg.reset_counters_each_epoch:
            bank.reset_counters()
        order = rng.permutation(n_samples)
        sums = np.zeros(4)  # ce, mcc, clg, total accumulated over batches
        n_batches = 0
        for start in range(0, n_samples, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch_labels = labels[idx]
            state = model.forward(inputs[idx])
            try:
                sim = build_similarity(bank)
                batch = Batch(state.features, state.logits, batch_labels)
                result = final_loss(batch, bank, sim, cfg.lambda1, cfg.lambda2)
            except DegenerateNormError as exc:
                raise DegenerateNormError(
                    f"epoch {epoch} batch {n_batches}: {exc}"
                ) from exc
            grads_w, grads_b = model.backward(
                state, result.grad_features, result.grad_logits
            )
            for i in range(len(model.weights)):
                velocities_w[i] = cfg.momentum * velocities_w[i] - lr * grads_w[i]
                model.weights[i] += velocities_w[i]
                velocities_b[i] = cfg.momentum * velocities_b[i] - lr * grads_b[i]
                model.biases[i] += velocities_b[i]
            if not model.parameters_finite():
                raise NonFiniteError(
                    f"epoch {epoch} batch {n_batches}: parameters left the finite range"
                )
            # Bank updates use the pre-step forward values, per sample in batch order.
            for k in range(idx.shape[0]):
                bank.update(int(batch_labels[k]), state.features[k], state.logits[k])
            sums += (result.ce, result.mcc, result.clg, result.total)
            n_batches += 1

        previous = bank.snapshots[-1]
        current = bank.snapshot(epoch)
        _, drift_mean = center_drift(previous, current)
        train_acc, _ = evaluate(model, train_data)
        test_acc = (
            evaluate(model, test_data)[0] if test_data is not None else float("nan")
        )
        recovery = float(np.mean(build_similarity(bank).most_similar == oracle))
        record = EpochRecord(
            epoch=epoch,
            lr=lr,
            ce=sums[0] / n_batches,
            mcc=sums[1] / n_batches,
            clg=sums[2] / n_batches,
            total=sums[3] / n_batches,
            train_accuracy=train_acc,
            test_accuracy=test_acc,
            center_drift=drift_mean,
            recovery_rate=recovery,
        )
        log.records.append(record)
        if progress is not None:
            progress(record)
        if epoch % cfg.lr_decay_every == 0:
            lr *= cfg.lr_decay_factor
    return log
