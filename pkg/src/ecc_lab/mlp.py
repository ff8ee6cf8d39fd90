"""Small multilayer perceptron with explicit forward and backward passes.

layer_dims = [input, hidden..., feature_dim, num_classes]. Hidden layers
use ReLU; the feature layer and the final class-score layer are plain
affine maps. The penultimate activation is the embedding that the center
bank and the cosine-based loss operate on; the last affine map produces
the raw logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidShapeError, ShapeMismatchError
from .linalg import as_matrix


@dataclass(frozen=True)
class ForwardState:
    """Everything the backward pass needs from one forward pass."""

    inputs: np.ndarray
    hidden_pre: list[np.ndarray]  # pre-activations of each ReLU layer
    hidden_acts: list[np.ndarray]  # layer inputs: x, then each ReLU output
    features: np.ndarray  # (M, D)
    logits: np.ndarray  # (M, N)


class MlpModel:
    """Dense ReLU network ending in an identity feature layer and logit layer."""

    def __init__(self, layer_dims: list[int], seed: int):
        if len(layer_dims) < 3:
            raise InvalidShapeError(
                "layer_dims needs at least [input, feature_dim, num_classes]"
            )
        if any(d < 1 for d in layer_dims):
            raise InvalidShapeError(f"all layer dims must be positive: {layer_dims}")
        self.layer_dims = [int(d) for d in layer_dims]
        self.init_seed = int(seed)
        rng = np.random.default_rng(self.init_seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        n_layers = len(self.layer_dims) - 1
        for i in range(n_layers):
            nin, nout = self.layer_dims[i], self.layer_dims[i + 1]
            # He scaling into ReLU layers, unit-variance scaling elsewhere.
            gain = 2.0 if i < n_layers - 2 else 1.0
            self.weights.append(rng.normal(0.0, math.sqrt(gain / nin), size=(nin, nout)))
            self.biases.append(np.zeros(nout))

    @property
    def feature_dim(self) -> int:
        return self.layer_dims[-2]

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    def forward(self, x) -> ForwardState:
        x = as_matrix(x, "inputs")
        if x.shape[1] != self.layer_dims[0]:
            raise ShapeMismatchError(
                f"input width {x.shape[1]} != model input dim {self.layer_dims[0]}"
            )
        hidden_pre: list[np.ndarray] = []
        hidden_acts: list[np.ndarray] = [x]
        a = x
        n_layers = len(self.weights)
        for i in range(n_layers - 2):
            z = a @ self.weights[i] + self.biases[i]
            hidden_pre.append(z)
            a = np.maximum(z, 0.0)
            hidden_acts.append(a)
        features = a @ self.weights[-2] + self.biases[-2]
        logits = features @ self.weights[-1] + self.biases[-1]
        return ForwardState(
            inputs=x,
            hidden_pre=hidden_pre,
            hidden_acts=hidden_acts,
            features=features,
            logits=logits,
        )

    def backward(
        self,
        state: ForwardState,
        grad_features: np.ndarray,
        grad_logits: np.ndarray,
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Parameter gradients given loss gradients at the feature and logit layers.

        grad_features is the direct contribution at the embedding; the logit
        path's contribution through the last affine map is added here.
        """
        n_layers = len(self.weights)
        grads_w: list[np.ndarray] = [np.empty(0)] * n_layers
        grads_b: list[np.ndarray] = [np.empty(0)] * n_layers

        grads_w[-1] = state.features.T @ grad_logits
        grads_b[-1] = grad_logits.sum(axis=0)
        d_feat = grad_logits @ self.weights[-1].T + grad_features

        grads_w[-2] = state.hidden_acts[-1].T @ d_feat
        grads_b[-2] = d_feat.sum(axis=0)
        d = d_feat @ self.weights[-2].T

        for i in range(n_layers - 3, -1, -1):
            d = d * (state.hidden_pre[i] > 0.0)
            grads_w[i] = state.hidden_acts[i].T @ d
            grads_b[i] = d.sum(axis=0)
            if i > 0:
                d = d @ self.weights[i].T
        return grads_w, grads_b

    def parameters_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )

    def to_dict(self) -> dict:
        return {
            "layer_dims": self.layer_dims,
            "init_seed": self.init_seed,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MlpModel":
        model = cls(raw["layer_dims"], raw["init_seed"])
        weights = [np.asarray(w, dtype=np.float64) for w in raw["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in raw["biases"]]
        if len(weights) != len(model.weights) or any(
            w.shape != mw.shape for w, mw in zip(weights, model.weights)
        ):
            raise ShapeMismatchError("serialized weights do not match layer_dims")
        model.weights = weights
        model.biases = biases
        return model
