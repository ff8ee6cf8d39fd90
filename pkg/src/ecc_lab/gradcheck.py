"""Central finite-difference verification of every analytic gradient.

Each check builds a random instance from a seed, computes the analytic
gradient, numerically differentiates the loss value, and reports the worst
elementwise relative error. Elements whose magnitude is below ABS_FLOOR on
both sides are compared absolutely at ABS_FLOOR instead, since relative
error is meaningless at the bottom of the float range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bank import CenterBank
from .loss import Batch, build_similarity, ce_loss, clg_loss, final_loss, mcc_loss
from .mlp import MlpModel

LOSS_TOL = 1e-6
NETWORK_TOL = 1e-4
LOSS_STEP = 1e-6
NETWORK_STEP = 1e-5
ABS_FLOOR = 1e-8


def max_rel_error(analytic, numeric) -> float:
    """Worst elementwise relative error; near-zero pairs judged absolutely."""
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(numeric, dtype=np.float64)
    err = np.abs(a - f)
    scale = np.maximum(np.abs(a), np.abs(f))
    worst = 0.0
    big = scale >= ABS_FLOOR
    if np.any(big):
        worst = float(np.max(err[big] / scale[big]))
    small_fail = ~big & (err > ABS_FLOOR)
    if np.any(small_fail):
        worst = max(
            worst, float(np.max(err[small_fail] / np.maximum(scale[small_fail], 1e-300)))
        )
    return worst


def _fd_grad(fun, x: np.ndarray, h: float) -> np.ndarray:
    """Central differences of a scalar function, elementwise in place."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        orig = x[ij]
        x[ij] = orig + h
        fp = fun()
        x[ij] = orig - h
        fm = fun()
        x[ij] = orig
        grad[ij] = (fp - fm) / (2.0 * h)
    return grad


def _filled_bank(rng: np.random.Generator, n: int, d: int) -> CenterBank:
    bank = CenterBank(n, d, seed=int(rng.integers(2**31)))
    for y in range(n):
        bank.update(y, rng.normal(size=d), rng.normal(size=n))
    return bank


def _safe_features(rng: np.random.Generator, m: int, d: int) -> np.ndarray:
    # Keep norms well above the finite-difference step.
    while True:
        x = rng.normal(size=(m, d))
        if np.linalg.norm(x, axis=1).min() > 1e-2:
            return x


def check_mcc(seed: int) -> float:
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 9))
    d = int(rng.integers(2, 17))
    n = int(rng.integers(2, 11))
    bank = _filled_bank(rng, n, d)
    sim = build_similarity(bank)
    features = _safe_features(rng, m, d)
    logits = rng.normal(size=(m, n))
    y = rng.integers(0, n, size=m)
    _, grad = mcc_loss(Batch(features, logits, y), bank, sim)
    numeric = _fd_grad(
        lambda: mcc_loss(Batch(features, logits, y), bank, sim)[0], features, LOSS_STEP
    )
    return max_rel_error(grad, numeric)


def check_clg(seed: int) -> float:
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 9))
    n = int(rng.integers(2, 11))
    d = int(rng.integers(2, 17))
    bank = _filled_bank(rng, n, d)
    features = rng.normal(size=(m, d))
    logits = rng.normal(size=(m, n)) * 2.0
    y = rng.integers(0, n, size=m)
    _, grad = clg_loss(Batch(features, logits, y), bank)
    numeric = _fd_grad(
        lambda: clg_loss(Batch(features, logits, y), bank)[0], logits, LOSS_STEP
    )
    return max_rel_error(grad, numeric)


def check_ce(seed: int) -> float:
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 9))
    n = int(rng.integers(2, 11))
    features = rng.normal(size=(m, 3))
    logits = rng.normal(size=(m, n)) * 2.0
    y = rng.integers(0, n, size=m)
    _, grad = ce_loss(Batch(features, logits, y))
    numeric = _fd_grad(
        lambda: ce_loss(Batch(features, logits, y))[0], logits, LOSS_STEP
    )
    return max_rel_error(grad, numeric)


def _network_instance(seed: int):
    """Tiny model/bank/batch kept safely away from ReLU kinks and zero norms."""
    for attempt in range(1000):
        rng = np.random.default_rng((seed, attempt))
        d_in = int(rng.integers(2, 7))
        hidden = int(rng.integers(2, 7))
        d_feat = int(rng.integers(2, 7))
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 5))
        model = MlpModel([d_in, hidden, d_feat, n], seed=int(rng.integers(2**31)))
        bank = _filled_bank(rng, n, d_feat)
        x = rng.normal(size=(m, d_in))
        y = rng.integers(0, n, size=m)
        lam1 = float(rng.uniform(0.5, 2.0))
        lam2 = float(rng.uniform(0.05, 0.5))
        state = model.forward(x)
        pre_ok = all(np.abs(z).min() > 1e-3 for z in state.hidden_pre)
        feat_ok = np.linalg.norm(state.features, axis=1).min() > 1e-2
        if pre_ok and feat_ok:
            return model, bank, x, y, lam1, lam2
    raise RuntimeError("could not build a kink-free network instance")


def check_network(seed: int) -> float:
    """Parameter gradients of the combined loss versus finite differences."""
    model, bank, x, y, lam1, lam2 = _network_instance(seed)
    sim = build_similarity(bank)

    def loss_value() -> float:
        state = model.forward(x)
        batch = Batch(state.features, state.logits, y)
        return final_loss(batch, bank, sim, lam1, lam2).total

    state = model.forward(x)
    batch = Batch(state.features, state.logits, y)
    result = final_loss(batch, bank, sim, lam1, lam2)
    grads_w, grads_b = model.backward(state, result.grad_features, result.grad_logits)

    worst = 0.0
    for i in range(len(model.weights)):
        numeric_w = _fd_grad(loss_value, model.weights[i], NETWORK_STEP)
        worst = max(worst, max_rel_error(grads_w[i], numeric_w))
        numeric_b = _fd_grad(loss_value, model.biases[i], NETWORK_STEP)
        worst = max(worst, max_rel_error(grads_b[i], numeric_b))
    return worst


CHECKS = {
    "mcc": (check_mcc, LOSS_TOL),
    "clg": (check_clg, LOSS_TOL),
    "ce": (check_ce, LOSS_TOL),
    "network": (check_network, NETWORK_TOL),
}


@dataclass
class GradCheckReport:
    trials: int
    worst: dict[str, float] = field(default_factory=dict)
    worst_seed: dict[str, int] = field(default_factory=dict)

    def passed(self, component: str) -> bool:
        return self.worst[component] <= CHECKS[component][1]

    @property
    def all_passed(self) -> bool:
        return all(self.passed(c) for c in self.worst)


def run_suite(seed: int = 0, trials: int = 100) -> GradCheckReport:
    """Run every component check over `trials` derived seeds."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    report = GradCheckReport(trials=trials)
    for name, (check, _tol) in CHECKS.items():
        worst = -1.0
        worst_seed = seed
        for t in range(trials):
            instance_seed = seed + t
            err = check(instance_seed)
            if err > worst:
                worst = err
                worst_seed = instance_seed
        report.worst[name] = worst
        report.worst_seed[name] = worst_seed
    return report
