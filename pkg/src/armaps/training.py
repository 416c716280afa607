"""Minibatch SGD with momentum, plateau decay and per-epoch metrics."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .augment import AugmentConfig, augment
from .errors import DivergenceError
from .ingestion import Dataset
from .network import Model, NetworkSpec, backward, forward, init_params
from .seeding import stream

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    augment: AugmentConfig | None = None
    lr_decay: float = 0.1
    plateau_patience: int = 2  # epochs without a 0.1% drop in train loss before decaying

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise ValueError("learning_rate must be >= 0 and momentum in [0, 1)")
        if isinstance(self.augment, dict):
            self.augment = AugmentConfig(**self.augment)


def train(spec: NetworkSpec, data: Dataset, cfg: TrainConfig, eval_data: Dataset | None = None,
          params=None, on_epoch=None):
    """Train from scratch (or from ``params``).  Returns ``(model, metrics)``.

    ``metrics`` holds one ``{epoch, train_loss, test_accuracy}`` dict per epoch;
    ``test_accuracy`` is ``None`` without ``eval_data``.  The input mean is
    taken from ``data`` and stored on the returned model.
    """
    if len(data) == 0:
        raise ValueError("training set is empty")
    if data.labels.max() >= spec.class_count:
        raise ValueError(f"label {data.labels.max()} out of range for {spec.class_count} classes")
    if params is None:
        params = init_params(spec, stream(cfg.seed, "init"))
    model = Model(spec, params, float(data.images.mean()), list(data.class_names))
    shuffle_rng = stream(cfg.seed, "shuffle")
    aug_rng = stream(cfg.seed, "augment")
    velocity = [None if p is None else [np.zeros_like(a) for a in _arrays(p)] for p in params]
    lr = cfg.learning_rate
    best, stale = np.inf, 0
    metrics = []
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            x = data.images[rows]
            if cfg.augment is not None:
                x = np.stack([augment(img, cfg.augment, aug_rng) for img in x])
            trace = forward(spec, params, model.prepare(x))
            loss, grads = backward(spec, params, trace, data.labels[rows])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"loss became {loss} at epoch {epoch}, batch starting {start} (learning rate {lr})")
            total += loss * len(rows)
            for p, g, v in zip(params, grads, velocity):
                if p is None:
                    continue
                for a, ga, va in zip(_arrays(p), g, v):
                    va *= cfg.momentum
                    va -= lr * ga
                    a += va
        train_loss = total / len(data)
        acc = evaluate(model, eval_data) if eval_data is not None and len(eval_data) else None
        metrics.append({"epoch": epoch, "train_loss": train_loss, "test_accuracy": acc})
        log.info("epoch %d loss %.4f acc %s lr %g", epoch, train_loss, acc, lr)
        if on_epoch is not None:
            on_epoch(metrics[-1])
        if train_loss < best * (1 - 1e-3):
            best, stale = train_loss, 0
        else:
            stale += 1
            if stale >= cfg.plateau_patience:
                lr *= cfg.lr_decay
                stale = 0
    return model, metrics


def _arrays(p):
    return (p.kernel, p.bias) if hasattr(p, "kernel") else (p.weight, p.bias)


def predictions(model: Model, data: Dataset):
    """Predicted class per image; ties go to the lowest class index."""
    return np.argmax(model.predict(data.images), axis=1)


def evaluate(model: Model, data: Dataset) -> float:
    if len(data) == 0:
        raise ValueError("evaluation set is empty")
    return accuracy(predictions(model, data), data.labels)


def accuracy(predicted, labels) -> float:
    predicted, labels = np.asarray(predicted), np.asarray(labels)
    if labels.size == 0:
        raise ValueError("no labels to score")
    return float(np.count_nonzero(predicted == labels) / labels.size)


def per_class_accuracy(predicted, labels, class_names):
    out = {}
    for k, name in enumerate(class_names):
        sel = np.asarray(labels) == k
        if sel.any():
            out[name] = {"accuracy": float(np.mean(np.asarray(predicted)[sel] == k)), "count": int(sel.sum())}
    return out


def write_metrics(metrics, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for m in metrics:
            fh.write(json.dumps(m, sort_keys=True) + "\n")
