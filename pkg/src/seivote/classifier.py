"""Per-subsample voters: a pluggable contract, a softmax baseline, and a
synthetic confusion-matrix voter.

The voting statistics only require each vote to be correct more than half
the time, so the trainable baseline is deliberately small: mean-pooled
bispectrum image blocks fed to a regularized linear softmax.  Anything
implementing ``Classifier`` can be plugged in instead.  ``ConfusionVoter``
bypasses signal processing entirely and draws votes straight from a fixed
row-stochastic confusion matrix, which isolates the stopping-rule
statistics from classifier quality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Protocol, Sequence, runtime_checkable

import numpy as np

from .bispectrum import BispectrumImage
from .rng import substream

_DEFAULT_L2 = 0.05


@runtime_checkable
class Classifier(Protocol):
    """Behavioral contract for a per-subsample voter."""

    num_classes: int

    def class_probabilities(self, image: BispectrumImage) -> np.ndarray: ...

    def classify(self, image: BispectrumImage) -> int: ...


def _pooled_features(pixels: np.ndarray, pooling: int) -> np.ndarray:
    h, w, _ = pixels.shape
    if h % pooling != 0 or w % pooling != 0:
        raise ValueError(f"image {h}x{w} not divisible by pooling block {pooling}")
    scaled = pixels.astype(np.float64) / 255.0
    pooled = scaled.reshape(h // pooling, pooling, w // pooling, pooling, 3).mean(axis=(1, 3))
    return pooled.reshape(-1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class SoftmaxModel:
    """Linear softmax over mean-pooled image blocks."""

    weights: np.ndarray  # [num_classes, feature_dim]
    biases: np.ndarray  # [num_classes]
    pooling: int
    num_classes: int
    validation_accuracy: float | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.shape != (self.num_classes, self.weights.shape[1]):
            raise ValueError(f"weights must be [num_classes, D], got {self.weights.shape}")
        if self.biases.shape != (self.num_classes,):
            raise ValueError(f"biases must be [num_classes], got {self.biases.shape}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("model parameters must be finite")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, num_classes: int, image_side: int, pooling: int) -> "SoftmaxModel":
        if image_side % pooling != 0:
            raise ValueError(f"image side {image_side} not divisible by pooling {pooling}")
        dim = 3 * (image_side // pooling) ** 2
        return cls(
            weights=np.zeros((num_classes, dim)),
            biases=np.zeros(num_classes),
            pooling=pooling,
            num_classes=num_classes,
        )

    def features(self, image: BispectrumImage) -> np.ndarray:
        f = _pooled_features(image.pixels, self.pooling)
        if f.size != self.feature_dim:
            raise ValueError(
                f"image yields {f.size} features but model expects {self.feature_dim}"
            )
        return f

    def class_probabilities(self, image: BispectrumImage) -> np.ndarray:
        return _softmax(self.weights @ self.features(image) + self.biases)

    def classify(self, image: BispectrumImage) -> int:
        # np.argmax returns the first maximum, which is the required
        # lowest-index tie break.
        return int(np.argmax(self.class_probabilities(image)))


@dataclass(frozen=True)
class TrainingSettings:
    epochs: int = 150
    batch_size: int = 32
    learning_rate: float = 2.0
    l2_penalty: float = _DEFAULT_L2
    pooling: int = 4
    val_floor: float = 0.60
    shuffle_seed: int = 0


@dataclass
class ImageSet:
    """Labeled feature images as dense arrays."""

    pixels: np.ndarray  # [n, H, W, 3] uint8
    labels: np.ndarray  # [n] int

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.pixels.shape[0] != self.labels.shape[0]:
            raise ValueError("pixels and labels disagree on the number of items")

    def __len__(self) -> int:
        return self.labels.size

    @classmethod
    def from_images(cls, images: Sequence[BispectrumImage], labels: Sequence[int]) -> "ImageSet":
        return cls(np.stack([im.pixels for im in images]), np.asarray(labels))


def _pooled_matrix(imageset: ImageSet, pooling: int) -> np.ndarray:
    n, h, w, _ = imageset.pixels.shape
    if h % pooling != 0 or w % pooling != 0:
        raise ValueError(f"images {h}x{w} not divisible by pooling block {pooling}")
    scaled = imageset.pixels.astype(np.float64) / 255.0
    pooled = scaled.reshape(n, h // pooling, pooling, w // pooling, pooling, 3).mean(axis=(2, 4))
    return pooled.reshape(n, -1)


def _loss_and_grads(
    weights: np.ndarray,
    biases: np.ndarray,
    feats: np.ndarray,
    labels: np.ndarray,
    l2_penalty: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + l2_penalty * sum(W^2) and its gradients."""
    n = feats.shape[0]
    logits = feats @ weights.T + biases
    probs = _softmax(logits)
    nll = -np.mean(np.log(np.maximum(probs[np.arange(n), labels], 1e-300)))
    loss = nll + l2_penalty * float(np.sum(weights**2))
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grad_w = delta.T @ feats + 2.0 * l2_penalty * weights
    grad_b = delta.sum(axis=0)
    return float(loss), grad_w, grad_b


def per_class_accuracy(
    predictions: np.ndarray, labels: np.ndarray, num_classes: int
) -> np.ndarray:
    """Fraction correct within each true class; NaN for absent classes."""
    acc = np.full(num_classes, np.nan)
    for c in range(num_classes):
        mask = labels == c
        if mask.any():
            acc[c] = float(np.mean(predictions[mask] == c))
    return acc


def train_softmax(
    train: ImageSet, val: ImageSet, settings: TrainingSettings = TrainingSettings()
) -> tuple[SoftmaxModel, dict]:
    """Mini-batch gradient descent on cross-entropy + L2.

    The step size is halved (and the epoch's update rolled back) whenever
    the full-train loss would increase, so the recorded loss history is
    non-increasing.  Training stops at the epoch cap or as soon as every
    per-class validation accuracy exceeds ``val_floor``.

    Returns the model plus a history dict with loss and accuracy traces.
    """
    num_classes = int(max(train.labels.max(), val.labels.max())) + 1
    present = np.unique(train.labels)
    if num_classes < 2:
        raise ValueError("training needs at least 2 classes")
    missing = sorted(set(range(num_classes)) - set(present.tolist()))
    if missing:
        raise ValueError(f"training data is missing class(es) {missing}")

    feats = _pooled_matrix(train, settings.pooling)
    val_feats = _pooled_matrix(val, settings.pooling)
    dim = feats.shape[1]
    weights = np.zeros((num_classes, dim))
    biases = np.zeros(num_classes)
    lr = settings.learning_rate

    def full_loss(w, b):
        loss, _, _ = _loss_and_grads(w, b, feats, train.labels, settings.l2_penalty)
        return loss

    def val_accuracy(w, b):
        preds = np.argmax(val_feats @ w.T + b, axis=1)
        per_class = per_class_accuracy(preds, val.labels, num_classes)
        overall = float(np.mean(preds == val.labels))
        return overall, per_class

    loss_history = [full_loss(weights, biases)]
    n = len(train)
    overall_acc, per_class = val_accuracy(weights, biases)
    for epoch in range(settings.epochs):
        order = substream(settings.shuffle_seed, "shuffle", epoch).permutation(n)
        new_w, new_b = weights.copy(), biases.copy()
        for start in range(0, n, settings.batch_size):
            batch = order[start : start + settings.batch_size]
            _, gw, gb = _loss_and_grads(
                new_w, new_b, feats[batch], train.labels[batch], settings.l2_penalty
            )
            new_w -= lr * gw
            new_b -= lr * gb
        candidate = full_loss(new_w, new_b)
        if candidate > loss_history[-1]:
            lr /= 2.0  # reject the epoch; retry smaller steps
            continue
        weights, biases = new_w, new_b
        loss_history.append(candidate)
        overall_acc, per_class = val_accuracy(weights, biases)
        if np.all(per_class[~np.isnan(per_class)] > settings.val_floor) and not np.any(
            np.isnan(per_class)
        ):
            break

    model = SoftmaxModel(
        weights=weights,
        biases=biases,
        pooling=settings.pooling,
        num_classes=num_classes,
        validation_accuracy=overall_acc,
    )
    history = {
        "loss": loss_history,
        "validation_accuracy": overall_acc,
        "per_class_accuracy": per_class.tolist(),
    }
    return model, history


@dataclass(frozen=True)
class ConfusionVoter:
    """Synthetic voter defined entirely by a row-stochastic matrix.

    Row i holds the categorical distribution of votes emitted when the
    true class is i.  Draws are keyed by (rng_seed, true_class, draw key)
    and therefore reproducible and independent across keys.
    """

    matrix: np.ndarray
    rng_seed: int = 0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {m.shape}")
        if np.any(m < 0):
            raise ValueError("confusion matrix entries must be non-negative")
        if not np.allclose(m.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("confusion matrix rows must sum to 1 within 1e-9")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def symmetric(cls, num_classes: int, diagonal: float, rng_seed: int = 0) -> "ConfusionVoter":
        """Diagonal probability ``diagonal``, remainder uniform over rivals."""
        if num_classes < 2:
            raise ValueError("need at least 2 classes")
        if not (0.0 <= diagonal <= 1.0):
            raise ValueError(f"diagonal must lie in [0, 1], got {diagonal}")
        off = (1.0 - diagonal) / (num_classes - 1)
        m = np.full((num_classes, num_classes), off)
        np.fill_diagonal(m, diagonal)
        return cls(matrix=m, rng_seed=rng_seed)

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]

    def _row_cdf(self, true_class: int) -> np.ndarray:
        if not (0 <= true_class < self.num_classes):
            raise ValueError(f"class {true_class} out of range [0, {self.num_classes})")
        return np.cumsum(self.matrix[true_class])

    def sample(self, true_class: int, draw_index: int) -> int:
        """One vote for an object of ``true_class``, keyed by draw_index."""
        cdf = self._row_cdf(true_class)
        u = substream(self.rng_seed, "confusion", true_class, draw_index).random()
        return int(np.searchsorted(cdf, u, side="right"))

    def stream(self, true_class: int, *decision_key: int | str) -> Iterator[int]:
        """Infinite vote stream for one decision, keyed independently."""
        cdf = self._row_cdf(true_class)
        rng = substream(self.rng_seed, "stream", true_class, *decision_key)
        while True:
            for u in rng.random(64):
                yield int(np.searchsorted(cdf, u, side="right"))


def confusion_sample(voter: ConfusionVoter, true_class: int, draw_index: int) -> int:
    return voter.sample(true_class, draw_index)


def confusion_from_labels(
    true_labels: np.ndarray, predicted_labels: np.ndarray, num_classes: int
) -> np.ndarray:
    """Empirical row-stochastic confusion matrix from parallel label arrays."""
    true_labels = np.asarray(true_labels)
    predicted_labels = np.asarray(predicted_labels)
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        counts[t, p] += 1
    row_totals = counts.sum(axis=1)
    empty = np.flatnonzero(row_totals == 0)
    if empty.size:
        raise ValueError(f"no items for class(es) {empty.tolist()}")
    return counts / row_totals[:, None]


def estimate_confusion(
    model: Classifier, images: ImageSet, num_classes: int | None = None
) -> np.ndarray:
    """Row i = empirical distribution of predictions over items of class i."""
    if num_classes is None:
        num_classes = model.num_classes
    preds = np.array([model.classify(BispectrumImage(pixels=p)) for p in images.pixels])
    return confusion_from_labels(images.labels, preds, num_classes)


def save_model(model: SoftmaxModel, path: str | Path) -> None:
    """JSON header line + little-endian float64 weights then biases."""
    header = {
        "num_classes": model.num_classes,
        "pooling": model.pooling,
        "feature_dim": model.feature_dim,
        "validation_accuracy": model.validation_accuracy,
    }
    payload = model.weights.astype("<f8").tobytes() + model.biases.astype("<f8").tobytes()
    Path(path).write_bytes(json.dumps(header).encode("utf-8") + b"\n" + payload)


def load_model(path: str | Path) -> SoftmaxModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    raw = path.read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline].decode("utf-8"))
    num_classes = int(header["num_classes"])
    feature_dim = int(header["feature_dim"])
    expected = 8 * (num_classes * feature_dim + num_classes)
    payload = raw[newline + 1 :]
    if len(payload) != expected:
        raise ValueError(f"{path}: payload size {len(payload)} != expected {expected}")
    flat = np.frombuffer(payload, dtype="<f8")
    weights = flat[: num_classes * feature_dim].reshape(num_classes, feature_dim)
    biases = flat[num_classes * feature_dim :]
    return SoftmaxModel(
        weights=weights.copy(),
        biases=biases.copy(),
        pooling=int(header["pooling"]),
        num_classes=num_classes,
        validation_accuracy=header.get("validation_accuracy"),
    )
