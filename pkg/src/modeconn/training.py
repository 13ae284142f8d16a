"""Mini-batch SGD with momentum over flat weight vectors."""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import nn


class MinibatchStream:
    """Endless stream of mini-batch indices, reshuffled every epoch."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.n = n
        self.batch_size = min(batch_size, n)
        self.rng = rng
        self._perm = np.empty(0, dtype=np.int64)
        self._pos = 0

    @property
    def steps_per_epoch(self) -> int:
        return -(-self.n // self.batch_size)

    def next(self) -> np.ndarray:
        if self._pos >= len(self._perm):
            self._perm = self.rng.permutation(self.n)
            self._pos = 0
        idx = self._perm[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return idx


def step_schedule(base_lr: float, total: int, milestones=(0.5, 0.75), factor: float = 0.1):
    """Constant learning rate divided by ``1/factor`` at each milestone fraction."""
    def lr(i: int) -> float:
        k = sum(i > m * total for m in milestones)
        return base_lr * factor**k
    return lr


def sgd(w, config: nn.MLPConfig, dataset, iterations: int, lr: Callable[[int], float] | float,
        batch_size: int, rng: np.random.Generator, momentum: float = 0.9,
        callback: Callable | None = None, stream: MinibatchStream | None = None):
    """Run ``iterations`` SGD steps from ``w``; returns the final weights.

    ``lr`` is a constant or a function of the 1-based iteration index.
    ``callback(i, w, loss, lr)`` runs after every step.
    """
    w = np.array(config.check(w), dtype=np.float64)
    lr_fn = lr if callable(lr) else (lambda i, v=float(lr): v)
    stream = stream or MinibatchStream(len(dataset), batch_size, rng)
    buf = np.zeros_like(w)
    X, y = dataset.features, dataset.labels
    for i in range(1, iterations + 1):
        idx = stream.next()
        value, g = nn.loss_and_grad(w, config, X[idx], y[idx])
        if not np.isfinite(value):
            raise FloatingPointError(f"loss became {value} at iteration {i}")
        a = lr_fn(i)
        if momentum:
            buf = momentum * buf + g
            w -= a * buf
        else:
            w -= a * g
        if callback is not None:
            callback(i, w, value, a)
    return w


def train_model(config: nn.MLPConfig, dataset, epochs: int, lr: float, batch_size: int,
                seed: int, momentum: float = 0.9, init_seed: int | None = None,
                milestones=(0.5, 0.75), snapshot_every: int | None = None):
    """Train one network from a seeded He initialization with a step schedule.

    Returns ``(weights, history)``; ``history["snapshots"]`` holds copies of the
    weights every ``snapshot_every`` epochs when requested.
    """
    w0 = nn.init_params(config, seed if init_seed is None else init_seed)
    rng = np.random.default_rng(seed)
    stream = MinibatchStream(len(dataset), batch_size, rng)
    total = epochs * stream.steps_per_epoch
    history = {"loss": [], "snapshots": []}

    def record(i, w, value, a):
        history["loss"].append(value)
        if snapshot_every and i % (snapshot_every * stream.steps_per_epoch) == 0:
            history["snapshots"].append((i // stream.steps_per_epoch, w.copy()))

    if total == 0:
        return w0, history
    w = sgd(w0, config, dataset, total, step_schedule(lr, total, milestones), batch_size,
            rng, momentum, record, stream)
    return w, history
