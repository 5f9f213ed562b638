"""Learnable perceptual-class regions.

A region is the triple (classifier, point store, confidence tracker) shared
by P-nodes and goals: a small MLP mapping a percept to an activation in
[0, 1], a 400-entry FIFO store of labeled percepts, and a sliding window of
classification successes whose mean is the region's confidence.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .percept import Percept

POSITIVE = 1
NEGATIVE = 0

STORE_CAPACITY = 400
DEFAULT_HIDDEN = (128, 64, 32)
DEFAULT_WINDOW = 20
LEARNED_THRESHOLD = 0.95
EPOCHS = 50
BATCH_SIZE = 50


class EmptyRegionError(ValueError):
    """Raised when sampling positives from a region that has none."""


@dataclass(frozen=True)
class LabeledPoint:
    percept: Percept
    label: int  # POSITIVE or NEGATIVE
    step: int   # monotone event counter


class PointStore:
    """Ordered store of labeled points, capacity 400, oldest evicted first."""

    def __init__(self, capacity: int = STORE_CAPACITY):
        self.capacity = capacity
        self.points: deque[LabeledPoint] = deque()
        self.positive_count = 0
        self.negative_count = 0

    def __len__(self) -> int:
        return len(self.points)

    def add_point(self, point: LabeledPoint) -> None:
        if len(self.points) >= self.capacity:
            old = self.points.popleft()
            if old.label == POSITIVE:
                self.positive_count -= 1
            else:
                self.negative_count -= 1
        self.points.append(point)
        if point.label == POSITIVE:
            self.positive_count += 1
        else:
            self.negative_count += 1

    def positives(self) -> list[LabeledPoint]:
        return [p for p in self.points if p.label == POSITIVE]

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Stored points as (X, y) training arrays."""
        X = np.array([p.percept for p in self.points], dtype=np.float64)
        y = np.array([p.label for p in self.points], dtype=np.float64)
        return X, y


def sample_positives(store: PointStore, k: int, rng: np.random.Generator) -> list[Percept]:
    """Draw k positive percepts uniformly with replacement."""
    pos = store.positives()
    if not pos:
        raise EmptyRegionError("region has no positive points")
    idx = rng.integers(0, len(pos), size=k)
    return [pos[i].percept for i in idx]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    m = z >= 0
    out[m] = 1.0 / (1.0 + np.exp(-z[m]))
    ez = np.exp(z[~m])
    out[~m] = ez / (1.0 + ez)
    return out


class RegionModel:
    """MLP binary classifier: dense layers 10-...-1, ReLU hidden, sigmoid out.

    Trained with class-weighted binary cross-entropy and Adam.  Weights are
    initialized uniformly in [-0.05, 0.05] from the given seed so identical
    seeds give identical models.
    """

    def __init__(
        self,
        seed: int | np.random.SeedSequence,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        learning_rate: float = 1e-3,
    ):
        self.hidden = tuple(hidden)
        self.learning_rate = learning_rate
        init_rng = np.random.Generator(np.random.Philox(seed))
        sizes = (10, *self.hidden, 1)
        self.weights = [
            init_rng.uniform(-0.05, 0.05, size=(sizes[i], sizes[i + 1]))
            for i in range(len(sizes) - 1)
        ]
        self.biases = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]
        # Adam state
        self._m = [np.zeros_like(w) for w in self.weights] + [np.zeros_like(b) for b in self.biases]
        self._v = [np.zeros_like(a) for a in self._m]
        self._t = 0
        self.train_count = 0  # completed training sessions

    def _logits(self, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        acts = [X]
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
            acts.append(h)
        z = h @ self.weights[-1] + self.biases[-1]
        return z[:, 0], acts

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        z, _ = self._logits(np.asarray(X, dtype=np.float64))
        return _sigmoid(z)

    def predict(self, p: Percept) -> float:
        return float(self.predict_batch(np.asarray([p], dtype=np.float64))[0])

    def loss(self, X: np.ndarray, y: np.ndarray, w: np.ndarray | None = None) -> float:
        """Mean (weighted) binary cross-entropy."""
        z, _ = self._logits(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64)
        # log(1+exp(z)) - y*z, computed stably
        per = np.logaddexp(0.0, z) - y * z
        if w is not None:
            per = per * w
        return float(np.mean(per))

    def _adam_step(self, grads: list[np.ndarray]) -> None:
        self._t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        lr = self.learning_rate
        params = self.weights + self.biases
        for i, (p, g) in enumerate(zip(params, grads)):
            self._m[i] = b1 * self._m[i] + (1 - b1) * g
            self._v[i] = b2 * self._v[i] + (1 - b2) * g * g
            mhat = self._m[i] / (1 - b1 ** self._t)
            vhat = self._v[i] / (1 - b2 ** self._t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)

    def _backward(self, X: np.ndarray, y: np.ndarray, w: np.ndarray) -> list[np.ndarray]:
        z, acts = self._logits(X)
        n = X.shape[0]
        delta = ((_sigmoid(z) - y) * w / n)[:, None]
        grads_w: list[np.ndarray] = [None] * len(self.weights)
        grads_b: list[np.ndarray] = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = acts[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (acts[layer] > 0)
        return grads_w + grads_b

    def train_session(
        self,
        X: np.ndarray,
        y: np.ndarray,
        rng: np.random.Generator,
        epochs: int = EPOCHS,
        batch_size: int = BATCH_SIZE,
    ) -> None:
        """One training run over the dataset with per-class balancing weights."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = len(y)
        n_pos = int(y.sum())
        n_neg = n - n_pos
        if n_pos > 0 and n_neg > 0:
            w_pos = n / (2.0 * n_pos)
            w_neg = n / (2.0 * n_neg)
        else:
            w_pos = w_neg = 1.0  # single-class store: degenerate weighting
        w = np.where(y >= 0.5, w_pos, w_neg)
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                self._adam_step(self._backward(X[idx], y[idx], w[idx]))
        self.train_count += 1

    def weights_digest(self) -> str:
        h = hashlib.sha256()
        for a in self.weights + self.biases:
            h.update(a.tobytes())
        return h.hexdigest()[:16]


def train_if_mispredicted(model: RegionModel, store: PointStore,
                          latest: LabeledPoint, rng: np.random.Generator) -> bool:
    """Run a training session only when the thresholded prediction on the
    latest point mismatches its label; returns whether training ran."""
    predicted_positive = model.predict(latest.percept) >= 0.5
    if predicted_positive == (latest.label == POSITIVE):
        return False
    X, y = store.arrays()
    model.train_session(X, y, rng)
    return True


class ConfidenceTracker:
    """Ring buffer of the last N classification successes (Eq.-style mean)."""

    def __init__(self, window: int = DEFAULT_WINDOW):
        self.window = window
        self.outcomes: deque[int] = deque(maxlen=window)

    def record_outcome(self, success: int) -> float:
        if success not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {success}")
        self.outcomes.append(success)
        return self.confidence

    @property
    def confidence(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(self.outcomes) / len(self.outcomes)

    def is_learned(self) -> bool:
        """Learned = full window and confidence strictly above 0.95."""
        return len(self.outcomes) == self.window and self.confidence > LEARNED_THRESHOLD


@dataclass
class Region:
    """A node's learnable perceptual class: model + store + tracker."""

    node_id: str
    kind: str  # "goal" | "pnode"
    model: RegionModel
    store: PointStore = field(default_factory=PointStore)
    tracker: ConfidenceTracker = field(default_factory=ConfidenceTracker)
    train_rng: np.random.Generator | None = None

    def add_labeled(self, percept: Percept, label: int, step: int) -> bool:
        """Insert a labeled percept and train on misprediction."""
        point = LabeledPoint(percept, label, step)
        self.store.add_point(point)
        return train_if_mispredicted(self.model, self.store, point, self.train_rng)

    def predict(self, p: Percept) -> float:
        return self.model.predict(p)

    def is_learned(self) -> bool:
        return self.tracker.is_learned()

    def snapshot(self) -> dict:
        """JSON-ready summary used by the plotting tools."""
        return {
            "node_id": self.node_id,
            "kind": self.kind,
            "positive_points": [list(p.percept) for p in self.store.positives()],
            "negative_count": self.store.negative_count,
            "confidence": self.tracker.confidence,
            "weights_digest": self.model.weights_digest(),
        }
