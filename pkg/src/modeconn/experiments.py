"""End-to-end experiment routines shared by the CLI, demos and acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .curve_train import CurveTrainConfig, losses_on_grid, train_curve
from .curves import arclength, make_curve, t_grid
from .training import train_model


def derive_seed(root: int, stream: int) -> int:
    """Independent 32-bit seed for a named sub-stream of one root seed."""
    return int(np.random.SeedSequence([int(root), int(stream)]).generate_state(1)[0])


# fixed stream offsets under the global seed
STREAM_MODEL_A = 1
STREAM_MODEL_B = 2
STREAM_CURVE = 3
STREAM_FGE = 4
STREAM_JITTER = 5


def cosine_lr(base: float, total: int):
    return lambda i: base * 0.5 * (1.0 + math.cos(math.pi * i / total))


def connect(w_a, w_b, config: nn.MLPConfig, train, kind: str = "polychain", n_bends: int = 1,
            iterations: int = 3000, batch_size: int = 64, lr: float = 0.05,
            momentum: float = 0.9, seed: int = 0, jitter: float = 0.0,
            weight_decay_on_bends: bool = False):
    """Initialize bends on the segment and train them with a cosine-decayed rate."""
    spec = make_curve(kind, w_a, w_b, n_bends, jitter, seed)
    cfg = CurveTrainConfig(iterations, batch_size, cosine_lr(lr, iterations), momentum,
                           weight_decay_on_bends, seed)
    return train_curve(spec, config, train, cfg)


@dataclass
class SweepRow:
    factor: float
    widths: tuple
    worst_curve_loss: float
    endpoint_loss: float
    length_ratio: float

    @property
    def excess_loss(self) -> float:
        return self.worst_curve_loss - self.endpoint_loss


@dataclass
class SweepTable:
    rows: list

    def columns(self):
        return {
            "K": [r.factor for r in self.rows],
            "worst_curve_loss": [r.worst_curve_loss for r in self.rows],
            "endpoint_loss": [r.endpoint_loss for r in self.rows],
            "excess_loss": [r.excess_loss for r in self.rows],
            "length_ratio": [r.length_ratio for r in self.rows],
        }

    def to_dict(self):
        return {"rows": [dict(K=r.factor, widths=list(r.widths),
                              worst_curve_loss=r.worst_curve_loss,
                              endpoint_loss=r.endpoint_loss, excess_loss=r.excess_loss,
                              length_ratio=r.length_ratio) for r in self.rows]}


def width_sweep(train, base_hidden, factors, l2_coeff: float = 1e-4, pairs: int = 1,
                epochs: int = 100, lr: float = 0.05, batch_size: int = 64,
                curve_iterations: int = 3000, curve_lr: float = 0.05, kind: str = "bezier",
                grid_size: int = 121, seed: int = 0, batch_norm: bool = False) -> SweepTable:
    """Scale every hidden width by each factor, connect endpoint pairs, tabulate.

    Each row averages over ``pairs`` independently trained endpoint pairs: the
    worst train loss on the curve grid, the larger endpoint loss and the
    curve's length ratio.
    """
    rows = []
    in_dim, n_classes = train.features.shape[1], train.n_classes
    for K in factors:
        widths = tuple(max(1, round(h * K)) for h in base_hidden)
        config = nn.MLPConfig((in_dim, *widths, n_classes), batch_norm=batch_norm,
                              l2_coeff=l2_coeff)
        worst, ends, ratios = [], [], []
        for p in range(pairs):
            wa, _ = train_model(config, train, epochs, lr, batch_size,
                                derive_seed(seed, 100 + 2 * p))
            wb, _ = train_model(config, train, epochs, lr, batch_size,
                                derive_seed(seed, 101 + 2 * p))
            spec, _ = connect(wa, wb, config, train, kind, 1, curve_iterations, batch_size,
                              curve_lr, seed=derive_seed(seed, 200 + p))
            losses = losses_on_grid(spec, config, train, t_grid(grid_size))
            worst.append(float(losses.max()))
            ends.append(float(max(losses[0], losses[-1])))
            ratios.append(arclength(spec, grid_size)[1])
        rows.append(SweepRow(float(K), widths, float(np.mean(worst)), float(np.mean(ends)),
                             float(np.mean(ratios))))
    return SweepTable(rows)


def count_inversions(values) -> int:
    """Number of adjacent increases in a sequence expected to be non-increasing."""
    v = np.asarray(values, dtype=np.float64)
    return int(np.sum(np.diff(v) > 0))
