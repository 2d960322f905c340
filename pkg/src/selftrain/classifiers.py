"""Base-learner backbones: a closed-form random-feature ridge classifier and
a warm-startable mini-batch softmax classifier.

Both accept per-sample weights (the hook used to down-weight pseudo-labels)
and emit row-stochastic probability matrices. Argmax ties resolve to the
lowest class index.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def one_hot(y: np.ndarray, class_count: int) -> np.ndarray:
    out = np.zeros((len(y), class_count), dtype=np.float64)
    out[np.arange(len(y)), y] = 1.0
    return out


class ClassifierModel(ABC):
    """Contract every backbone satisfies: weighted fit + probability prediction."""

    backbone: str
    class_count: int

    @abstractmethod
    def fit(self, X: np.ndarray, y: np.ndarray,
            sample_weight: np.ndarray | None = None) -> "ClassifierModel":
        ...

    @abstractmethod
    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        ...

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def confidence(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X).max(axis=1)


class RandomFeatureRidge(ClassifierModel):
    """Ridge regression on a frozen random tanh feature map, solved in closed form.

    Refitting re-solves the normal equations from scratch; only the ridge
    weights change. Scores pass through a temperature-scaled softmax to
    produce calibrated-enough probabilities for confidence thresholding.
    """

    backbone = "noniterative"

    def __init__(self, class_count: int, input_dim: int, hidden_width: int = 512,
                 ridge_lambda: float = 1e-2, temperature: float = 0.2, seed: int = 0):
        if class_count < 2:
            raise ValueError("class_count must be >= 2")
        if ridge_lambda <= 0:
            raise ValueError("ridge_lambda must be > 0")
        if temperature <= 0:
            raise ValueError("temperature must be > 0")
        self.class_count = class_count
        self.input_dim = input_dim
        self.hidden_width = hidden_width
        self.ridge_lambda = ridge_lambda
        self.temperature = temperature
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((input_dim, hidden_width)) / np.sqrt(input_dim)
        self.bias = rng.uniform(-1.0, 1.0, hidden_width)
        self.weights: np.ndarray | None = None

    def _hidden(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} input features, got "
                             f"{X.shape[1] if X.ndim == 2 else '?'}")
        return np.tanh(X @ self.projection + self.bias)

    def fit(self, X, y, sample_weight=None):
        H = self._hidden(X)
        y = np.asarray(y, dtype=np.int64)
        if len(y) != len(H):
            raise ValueError("label length does not match row count")
        w = np.ones(len(H)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        if len(w) != len(H):
            raise ValueError("sample_weight length does not match row count")
        Y = one_hot(y, self.class_count)
        Hw = H * w[:, None]
        gram = H.T @ Hw + self.ridge_lambda * np.eye(self.hidden_width)
        target = Hw.T @ Y
        self.weights = np.linalg.solve(gram, target)
        return self

    def predict_proba(self, X):
        if self.weights is None:
            raise ValueError("model is not fitted")
        scores = self._hidden(X) @ self.weights
        return softmax(scores / self.temperature)

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Raw ridge outputs (one column per class) before calibration."""
        if self.weights is None:
            raise ValueError("model is not fitted")
        return self._hidden(X) @ self.weights

    def to_json(self) -> str:
        doc = {
            "kind": "random_feature_ridge",
            "class_count": self.class_count,
            "input_dim": self.input_dim,
            "hidden_width": self.hidden_width,
            "ridge_lambda": self.ridge_lambda,
            "temperature": self.temperature,
            "seed": self.seed,
            "projection": self.projection.ravel().tolist(),
            "bias": self.bias.tolist(),
            "weights": None if self.weights is None else self.weights.ravel().tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "RandomFeatureRidge":
        doc = json.loads(text)
        model = cls(doc["class_count"], doc["input_dim"], doc["hidden_width"],
                    doc["ridge_lambda"], doc["temperature"], doc["seed"])
        model.projection = np.asarray(doc["projection"]).reshape(doc["input_dim"],
                                                                 doc["hidden_width"])
        model.bias = np.asarray(doc["bias"])
        if doc["weights"] is not None:
            model.weights = np.asarray(doc["weights"]).reshape(doc["hidden_width"],
                                                               doc["class_count"])
        return model


def softmax_loss_and_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray,
                          sample_weight: np.ndarray):
    """Weighted-mean cross-entropy of a linear softmax and its exact gradient."""
    logits = X @ W + b
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    w_total = sample_weight.sum()
    loss = float(-(sample_weight * log_probs[np.arange(len(y)), y]).sum() / w_total)
    delta = (np.exp(log_probs) - one_hot(y, W.shape[1])) * sample_weight[:, None] / w_total
    return loss, X.T @ delta, delta.sum(axis=0)


def mlp_loss_and_grad(W1, b1, W2, b2, X, y, sample_weight):
    """Weighted-mean cross-entropy of a one-hidden-layer tanh softmax, with gradients."""
    hidden = np.tanh(X @ W1 + b1)
    logits = hidden @ W2 + b2
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    w_total = sample_weight.sum()
    loss = float(-(sample_weight * log_probs[np.arange(len(y)), y]).sum() / w_total)
    delta = (np.exp(log_probs) - one_hot(y, W2.shape[1])) * sample_weight[:, None] / w_total
    g_w2 = hidden.T @ delta
    g_b2 = delta.sum(axis=0)
    back = (delta @ W2.T) * (1.0 - hidden * hidden)
    return loss, X.T @ back, back.sum(axis=0), g_w2, g_b2


class SoftmaxSGD(ClassifierModel):
    """Mini-batch gradient-descent softmax classifier, optionally warm-started.

    With ``hidden_width`` set, a tanh hidden layer of that width is trained by
    backprop; otherwise the model is linear. Batch order is drawn from the
    model's own generator, so identical fit sequences reproduce exactly.
    """

    backbone = "iterative"

    def __init__(self, class_count: int, input_dim: int, learning_rate: float = 0.03,
                 batch_size: int = 64, epochs: int = 20, warm_start: bool = True,
                 hidden_width: int | None = None, seed: int = 0):
        if class_count < 2:
            raise ValueError("class_count must be >= 2")
        if learning_rate <= 0 or batch_size < 1 or epochs < 0:
            raise ValueError("invalid learning_rate / batch_size / epochs")
        self.class_count = class_count
        self.input_dim = input_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.warm_start = warm_start
        self.hidden_width = hidden_width
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._init_params()

    def _init_params(self):
        if self.hidden_width is None:
            self.weights = np.zeros((self.input_dim, self.class_count))
            self.bias = np.zeros(self.class_count)
        else:
            init_rng = np.random.default_rng(self.seed + 1)
            self.w1 = init_rng.standard_normal((self.input_dim, self.hidden_width)) \
                / np.sqrt(self.input_dim)
            self.b1 = np.zeros(self.hidden_width)
            self.weights = np.zeros((self.hidden_width, self.class_count))
            self.bias = np.zeros(self.class_count)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} input features, got "
                             f"{X.shape[1] if X.ndim == 2 else '?'}")
        return X

    def fit(self, X, y, sample_weight=None):
        X = self._check(X)
        y = np.asarray(y, dtype=np.int64)
        n = len(X)
        w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        if len(y) != n or len(w) != n:
            raise ValueError("label / weight length does not match row count")
        if self.epochs == 0:
            return self
        if not self.warm_start:
            self._init_params()

        lr = self.learning_rate
        # divergence surfaces as a non-finite epoch loss, so float overflow
        # along the way is expected rather than worth warning about
        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(self.epochs):
                order = self._rng.permutation(n)
                for start in range(0, n, self.batch_size):
                    sel = order[start:start + self.batch_size]
                    if self.hidden_width is None:
                        _, g_w, g_b = softmax_loss_and_grad(self.weights, self.bias,
                                                            X[sel], y[sel], w[sel])
                        self.weights -= lr * g_w
                        self.bias -= lr * g_b
                    else:
                        _, g_w1, g_b1, g_w2, g_b2 = mlp_loss_and_grad(
                            self.w1, self.b1, self.weights, self.bias,
                            X[sel], y[sel], w[sel])
                        self.w1 -= lr * g_w1
                        self.b1 -= lr * g_b1
                        self.weights -= lr * g_w2
                        self.bias -= lr * g_b2
                if self.hidden_width is None:
                    loss, _, _ = softmax_loss_and_grad(self.weights, self.bias, X, y, w)
                else:
                    loss = mlp_loss_and_grad(self.w1, self.b1, self.weights,
                                             self.bias, X, y, w)[0]
                if not np.isfinite(loss):
                    raise ValueError(
                        f"training diverged at epoch {epoch} (non-finite loss); "
                        f"reduce learning_rate below {lr}"
                    )
        return self

    def predict_proba(self, X):
        X = self._check(X)
        if self.hidden_width is None:
            return softmax(X @ self.weights + self.bias)
        return softmax(np.tanh(X @ self.w1 + self.b1) @ self.weights + self.bias)

    def to_json(self) -> str:
        doc = {
            "kind": "softmax_sgd",
            "class_count": self.class_count,
            "input_dim": self.input_dim,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "warm_start": self.warm_start,
            "hidden_width": self.hidden_width,
            "seed": self.seed,
            "weights": self.weights.ravel().tolist(),
            "bias": self.bias.tolist(),
        }
        if self.hidden_width is not None:
            doc["w1"] = self.w1.ravel().tolist()
            doc["b1"] = self.b1.tolist()
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SoftmaxSGD":
        doc = json.loads(text)
        model = cls(doc["class_count"], doc["input_dim"], doc["learning_rate"],
                    doc["batch_size"], doc["epochs"], doc["warm_start"],
                    doc["hidden_width"], doc["seed"])
        shape0 = doc["input_dim"] if doc["hidden_width"] is None else doc["hidden_width"]
        model.weights = np.asarray(doc["weights"]).reshape(shape0, doc["class_count"])
        model.bias = np.asarray(doc["bias"])
        if doc["hidden_width"] is not None:
            model.w1 = np.asarray(doc["w1"]).reshape(doc["input_dim"], doc["hidden_width"])
            model.b1 = np.asarray(doc["b1"])
        return model


def load_model_json(text: str) -> ClassifierModel:
    kind = json.loads(text).get("kind")
    if kind == "random_feature_ridge":
        return RandomFeatureRidge.from_json(text)
    if kind == "softmax_sgd":
        return SoftmaxSGD.from_json(text)
    raise ValueError(f"unknown model kind {kind!r}")
