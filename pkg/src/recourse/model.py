"""Small feed-forward networks with hand-derived gradients and ADAM training.

Everything here is plain numpy: the model family is fixed (fully-connected
layers, tanh or relu hidden units, a linear or sigmoid output head), so
gradients are written out by hand instead of pulling in an autodiff framework.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

MODEL_FORMAT_VERSION = 1

HIDDEN_ACTIVATIONS = ("tanh", "relu")
OUTPUT_HEADS = ("linear_score", "sigmoid_probability")
LOSSES = ("squared_error", "binary_cross_entropy")

# keeps sigmoid outputs inside the open interval (0, 1) even when the
# float rounding would hit 0.0 or 1.0 exactly
_PROB_CLIP = 1e-12


class ShapeError(ValueError):
    """Input does not match the model's expected dimensions."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, clipped into (0, 1)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, _PROB_CLIP, 1.0 - _PROB_CLIP)


@dataclass
class MlpModel:
    """Fully-connected network: input -> hidden... -> single output.

    ``weights[i]`` has shape (layer_dims[i], layer_dims[i+1]) and
    ``biases[i]`` has shape (layer_dims[i+1],).  Models are treated as
    immutable once built; training returns a new instance.
    """

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "tanh"
    output_head: str = "linear_score"

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(d <= 0 for d in self.layer_dims):
            raise ValueError("layer dims must be positive")
        if self.layer_dims[-1] != 1:
            raise ValueError("only single-output models are supported")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown activation {self.hidden_activation!r}")
        if self.output_head not in OUTPUT_HEADS:
            raise ValueError(f"unknown output head {self.output_head!r}")
        if len(self.weights) != len(self.layer_dims) - 1:
            raise ShapeError("weight count does not match layer count")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expect:
                raise ShapeError(f"layer {i}: weight shape {w.shape}, expected {expect}")
            if b.shape != (self.layer_dims[i + 1],):
                raise ShapeError(f"layer {i}: bias shape {b.shape}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases interleaved: [W0, b0, W1, b1, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"expected input of length {self.input_dim}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ShapeError("input contains non-finite entries")
        return x, single

    def _forward_pass(self, x2d: np.ndarray):
        """Return (score, activations, preacts) for a validated 2-D batch."""
        acts = [x2d]
        pres = []
        a = x2d
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            pres.append(z)
            if i < n_layers - 1:
                a = np.tanh(z) if self.hidden_activation == "tanh" else np.maximum(z, 0.0)
                acts.append(a)
        z_out = pres[-1][:, 0]
        if self.output_head == "sigmoid_probability":
            score = sigmoid(z_out)
        else:
            score = z_out
        return score, acts, pres

    def forward(self, x):
        """Score a single feature vector (returns float) or a batch (1-D array)."""
        x2d, single = self._check_input(x)
        score, _, _ = self._forward_pass(x2d)
        return float(score[0]) if single else score

    def _hidden_grad(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        if self.hidden_activation == "tanh":
            return 1.0 - a * a
        # relu subgradient at exactly 0 is defined as 0
        return (z > 0).astype(float)

    def input_gradient(self, x):
        """d score / d input, same shape as ``x`` (vector or batch)."""
        x2d, single = self._check_input(x)
        score, acts, pres = self._forward_pass(x2d)
        if self.output_head == "sigmoid_probability":
            delta = (score * (1.0 - score))[:, None]
        else:
            delta = np.ones((x2d.shape[0], 1))
        # backprop through hidden layers
        for i in range(len(self.weights) - 1, 0, -1):
            delta = delta @ self.weights[i].T
            delta = delta * self._hidden_grad(pres[i - 1], acts[i])
        grad = delta @ self.weights[0].T
        return grad[0] if single else grad

    # -- serialization ------------------------------------------------------

    def to_doc(self, training_meta: dict | None = None) -> dict:
        """Versioned JSON document with a content hash over everything else."""
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "layer_dims": list(self.layer_dims),
            "activation": self.hidden_activation,
            "output_head": self.output_head,
            "layers": [
                {"weights": w.flatten(order="C").tolist(), "biases": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
            "training": training_meta or {},
        }
        doc["content_hash"] = content_hash(doc)
        return doc

    @classmethod
    def from_doc(cls, doc: dict, verify_hash: bool = True) -> "MlpModel":
        if verify_hash and doc.get("content_hash") != content_hash(doc):
            raise ValueError("model document content hash does not verify")
        dims = tuple(doc["layer_dims"])
        weights, biases = [], []
        for i, layer in enumerate(doc["layers"]):
            w = np.array(layer["weights"], dtype=float).reshape(dims[i], dims[i + 1])
            weights.append(w)
            biases.append(np.array(layer["biases"], dtype=float))
        return cls(dims, weights, biases, doc["activation"], doc["output_head"])


def _canonical(value):
    # JSON does not distinguish 1.0 from 1, so integral floats are hashed as
    # ints; otherwise a document re-serialized by another language would stop
    # verifying
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, float) and value.is_integer() and abs(value) <= 2**53:
        return int(value)
    return value


def content_hash(doc: dict) -> str:
    """SHA-256 of the canonicalized document with the hash field removed."""
    stripped = {k: _canonical(v) for k, v in doc.items() if k != "content_hash"}
    blob = json.dumps(stripped, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def init_model(
    layer_dims,
    hidden_activation: str = "tanh",
    output_head: str = "linear_score",
    seed: int = 0,
) -> MlpModel:
    """Seeded Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in layer_dims)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases, hidden_activation, output_head)


# -- training ---------------------------------------------------------------


@dataclass
class AdamConfig:
    step_size: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def validate(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class TrainConfig:
    loss: str = "squared_error"
    regularizer_weight: float = 1e-4
    epochs: int = 500
    batch_size: int | None = None  # None = full batch
    adam: AdamConfig = field(default_factory=AdamConfig)
    rng_seed: int = 0

    def validate(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.regularizer_weight < 0:
            raise ValueError("regularizer_weight must be nonnegative")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        self.adam.validate()


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(
            [np.zeros_like(p) for p in params],
            [np.zeros_like(p) for p in params],
            0,
        )


def adam_step(
    state: AdamState,
    params: list[np.ndarray],
    grads: list[np.ndarray],
    config: AdamConfig,
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected ADAM update; returns fresh parameter arrays."""
    if len(params) != len(grads):
        raise ShapeError("parameter / gradient count mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"parameter shape {p.shape} vs gradient shape {g.shape}")
    t = state.step_count + 1
    b1, b2 = config.beta1, config.beta2
    new_params = []
    for i, (p, g) in enumerate(zip(params, grads)):
        m = b1 * state.first_moment[i] + (1 - b1) * g
        v = b2 * state.second_moment[i] + (1 - b2) * g * g
        state.first_moment[i] = m
        state.second_moment[i] = v
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_params.append(p - config.step_size * m_hat / (np.sqrt(v_hat) + config.epsilon))
    state.step_count = t
    return new_params, state


def _loss_delta(model: MlpModel, score, y, loss: str, n: int):
    """Per-sample d loss / d output-preactivation, for mean loss over a batch."""
    if loss == "binary_cross_entropy":
        if model.output_head != "sigmoid_probability":
            raise ValueError("binary_cross_entropy requires a sigmoid_probability head")
        return (score - y) / n
    # squared error
    if model.output_head == "sigmoid_probability":
        return 2.0 * (score - y) * score * (1.0 - score) / n
    return 2.0 * (score - y) / n


def batch_loss(model: MlpModel, X, y, config: TrainConfig) -> float:
    """Mean data loss plus the L2 weight penalty."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    score = model.forward(X)
    if config.loss == "binary_cross_entropy":
        data = float(np.mean(-(y * np.log(score) + (1 - y) * np.log(1 - score))))
    else:
        data = float(np.mean((score - y) ** 2))
    reg = config.regularizer_weight * sum(float(np.sum(w * w)) for w in model.weights)
    return data + reg


def gradient_wrt_weights(
    model: MlpModel, X, y, config: TrainConfig
) -> tuple[float, list[np.ndarray]]:
    """Loss and its gradient in the ``model.parameters()`` layout.

    The loss is the batch mean, so a single sample reproduces the plain
    per-sample formulas; the L2 penalty applies to weight matrices only.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if not np.all(np.isfinite(y)):
        raise ValueError("labels contain non-finite entries")
    score, acts, pres = model._forward_pass(X)
    n = X.shape[0]
    delta = _loss_delta(model, score, y, config.loss, n)[:, None]
    grads: list[np.ndarray] = [None] * (2 * len(model.weights))
    for i in range(len(model.weights) - 1, -1, -1):
        gw = acts[i].T @ delta
        gb = delta.sum(axis=0)
        if config.regularizer_weight:
            gw = gw + 2.0 * config.regularizer_weight * model.weights[i]
        grads[2 * i] = gw
        grads[2 * i + 1] = gb
        if i > 0:
            delta = (delta @ model.weights[i].T) * model._hidden_grad(pres[i - 1], acts[i])
    return batch_loss(model, X, y, config), grads


def train(
    model: MlpModel, X, y, config: TrainConfig
) -> tuple[MlpModel, list[float]]:
    """Train a copy of ``model``; returns (trained model, per-epoch loss trace)."""
    config.validate()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    params = [p.copy() for p in model.parameters()]
    work = _model_from_params(model, params)
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(config.rng_seed)
    trace: list[float] = []
    for epoch in range(config.epochs):
        if config.batch_size is None or config.batch_size >= X.shape[0]:
            batches = [(X, y)]
        else:
            order = rng.permutation(X.shape[0])
            batches = [
                (X[order[i : i + config.batch_size]], y[order[i : i + config.batch_size]])
                for i in range(0, X.shape[0], config.batch_size)
            ]
        for bx, by in batches:
            _, grads = gradient_wrt_weights(work, bx, by, config)
            params, state = adam_step(state, params, grads, config.adam)
            work = _model_from_params(model, params)
        epoch_loss = batch_loss(work, X, y, config)
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(f"loss became non-finite at epoch {epoch}")
        trace.append(epoch_loss)
    return work, trace


def _model_from_params(template: MlpModel, params: list[np.ndarray]) -> MlpModel:
    weights = [params[2 * i] for i in range(len(template.weights))]
    biases = [params[2 * i + 1] for i in range(len(template.weights))]
    return replace(template, weights=weights, biases=biases)
