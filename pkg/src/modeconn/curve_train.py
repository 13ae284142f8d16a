"""Training the bends of a connecting curve, plus the two curve-loss estimators.

The training objective is the expected loss under ``t ~ U(0, 1)``. Each step
draws one ``t``, evaluates the network at ``phi(t)`` on a mini-batch, and
pushes ``dL/dphi`` back onto the bends. The arclength-weighted objective is
only estimated, never optimized.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import nn
from .curves import CurveSpec, backprop_to_bends, point_at, speed_at, t_grid
from .training import MinibatchStream


@dataclass
class CurveTrainConfig:
    iterations: int
    batch_size: int = 64
    learning_rate: float | Callable[[int], float] = 0.05
    momentum: float = 0.9
    weight_decay_on_bends: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    def lr(self, i: int) -> float:
        lr = self.learning_rate
        return float(lr(i)) if callable(lr) else float(lr)


@dataclass
class CurveHistory:
    iteration: np.ndarray
    t: np.ndarray
    loss: np.ndarray

    def columns(self):
        return {"iteration": self.iteration, "t": self.t, "loss": self.loss}

    def to_dict(self):
        return self.columns()


def curve_loss_grad(spec: CurveSpec, config: nn.MLPConfig, X, y, t: float):
    """``L(phi(t))`` on a batch and its gradient for every bend."""
    value, g = nn.loss_and_grad(point_at(spec, t), config, X, y)
    return value, backprop_to_bends(spec, t, g)


def train_curve(spec: CurveSpec, config: nn.MLPConfig, dataset, cfg: CurveTrainConfig):
    """Fit the bends of ``spec``; endpoints never move. Returns ``(spec, history)``."""
    config.check(spec.start)
    X, y = dataset.features, dataset.labels

    def loss_grad(w, idx):
        return nn.loss_and_grad(w, config, X[idx], y[idx])

    return train_bends(spec, loss_grad, len(dataset), cfg, config.l2_coeff)


def train_bends(spec: CurveSpec, loss_grad, n_examples: int, cfg: CurveTrainConfig,
                l2_coeff: float = 0.0):
    """Stochastic bend training against any ``loss_grad(w, batch_indices)``.

    Each iteration draws one ``t ~ U(0, 1)`` and one mini-batch, and applies a
    momentum-SGD step to the bends only.
    """
    if spec.kind == "segment":
        raise ValueError("a segment has no parameters to train; evaluate it directly")
    rng = np.random.default_rng(cfg.seed)
    stream = MinibatchStream(n_examples, cfg.batch_size, rng)
    bends = [b.copy() for b in spec.bends]
    bufs = [np.zeros_like(b) for b in bends]
    ts = np.empty(cfg.iterations)
    losses = np.empty(cfg.iterations)
    for i in range(1, cfg.iterations + 1):
        t = float(rng.uniform(0.0, 1.0))
        idx = stream.next()
        current = CurveSpec(spec.kind, spec.start, spec.end, bends)
        value, g = loss_grad(point_at(current, t), idx)
        if not np.isfinite(value):
            raise FloatingPointError(f"curve loss became {value} at iteration {i}")
        lr = cfg.lr(i)
        for b, gb, buf in zip(bends, backprop_to_bends(current, t, g), bufs):
            if cfg.weight_decay_on_bends:
                gb = gb + 2.0 * l2_coeff * b
            buf *= cfg.momentum
            buf += gb
            b -= lr * buf
        ts[i - 1] = t
        losses[i - 1] = value
    trained = CurveSpec(spec.kind, spec.start, spec.end, bends)
    return trained, CurveHistory(np.arange(1, cfg.iterations + 1), ts, losses)


def point_loss(w, config: nn.MLPConfig, dataset, bn_data=None) -> float:
    """Full-data regularized loss of one weight vector.

    Batch-norm statistics are recomputed on ``bn_data`` (default: ``dataset``).
    """
    stats = nn.eval_stats(w, config, (dataset if bn_data is None else bn_data).features)
    return nn.loss(w, config, dataset.features, dataset.labels, stats)


def losses_on_grid(spec: CurveSpec, config, dataset, ts, bn_data=None) -> np.ndarray:
    return np.array([point_loss(point_at(spec, t), config, dataset, bn_data) for t in ts])


def speeds_on_grid(spec: CurveSpec, ts) -> np.ndarray:
    return np.array([speed_at(spec, t) for t in ts])


def uniform_t_mean(ts, values) -> float:
    """Trapezoidal mean of ``values`` over ``t`` in [0, 1]."""
    return float(np.trapezoid(values, ts) / (ts[-1] - ts[0]))


def arclength_mean(ts, values, speeds) -> float:
    """Trapezoidal ``int m |phi'| dt / int |phi'| dt``.

    Constant speed (or a curve of zero length) reduces to the plain t-mean.
    """
    speeds = np.asarray(speeds, dtype=np.float64)
    norm = np.trapezoid(speeds, ts)
    if norm == 0.0 or np.all(speeds == speeds[0]):
        return uniform_t_mean(ts, values)
    return float(np.trapezoid(values * speeds, ts) / norm)


def loss_uniform_t(spec, config, dataset, grid_size: int = 121, bn_data=None) -> float:
    """Grid estimate of the expected loss under ``t ~ U(0, 1)``."""
    ts = t_grid(grid_size)
    return uniform_t_mean(ts, losses_on_grid(spec, config, dataset, ts, bn_data))


def loss_uniform_curve(spec, config, dataset, grid_size: int = 121, bn_data=None) -> float:
    """Grid estimate of the expected loss under the uniform distribution on the curve."""
    ts = t_grid(grid_size)
    values = losses_on_grid(spec, config, dataset, ts, bn_data)
    return arclength_mean(ts, values, speeds_on_grid(spec, ts))


def loss_uniform_t_mc(spec, config, dataset, n_samples: int, seed: int, bn_data=None):
    """Monte Carlo estimate ``(mean, standard_error)`` of the uniform-t loss."""
    rng = np.random.default_rng(seed)
    vals = losses_on_grid(spec, config, dataset, rng.uniform(0.0, 1.0, n_samples), bn_data)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_samples))
