"""Fast Geometric Ensembling.

Starting from a pretrained network, SGD runs under a short triangular cyclic
learning rate and the weights are saved at the middle of every cycle, where
the learning rate bottoms out. The saved networks are then ensembled.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .evaluation import METRICS, evaluate_point
from .training import MinibatchStream, sgd, train_model


@dataclass(frozen=True)
class CyclicLRSchedule:
    lr_high: float  # alpha_1, at cycle boundaries
    lr_low: float   # alpha_2, at mid-cycle
    cycle: int      # iterations per cycle, even

    def __post_init__(self):
        if not self.lr_high > self.lr_low > 0:
            raise ValueError(f"need lr_high > lr_low > 0, got {self.lr_high}, {self.lr_low}")
        if self.cycle < 2 or self.cycle % 2:
            raise ValueError(f"cycle length must be a positive even integer, got {self.cycle}")


def cycle_position(cycle: int, i: int) -> float:
    """Fraction ``t(i)`` of the current cycle completed after iteration ``i``."""
    return ((i - 1) % cycle + 1) / cycle


def lr_at(schedule: CyclicLRSchedule, i: int) -> float:
    """Triangular learning rate: ``lr_high`` at cycle ends, ``lr_low`` at mid-cycle."""
    if i < 1:
        raise ValueError("iterations are numbered from 1")
    t = cycle_position(schedule.cycle, i)
    a1, a2 = schedule.lr_high, schedule.lr_low
    if t <= 0.5:
        return (1.0 - 2.0 * t) * a1 + 2.0 * t * a2
    return (2.0 - 2.0 * t) * a2 + (2.0 * t - 1.0) * a1


def collection_iterations(cycle: int, n_iterations: int) -> list:
    return [i for i in range(1, n_iterations + 1) if i % cycle == cycle // 2]


@dataclass
class FGERunConfig:
    n_iterations: int
    schedule: CyclicLRSchedule
    batch_size: int = 64
    seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")


@dataclass
class FGEResult:
    checkpoints: list
    collected_at: list
    lrs: np.ndarray = field(repr=False)
    losses: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)  # ||w_i - w_start|| per iteration


def pretrain(config: nn.MLPConfig, dataset, epochs: int, lr: float, batch_size: int,
             seed: int, momentum: float = 0.9, snapshot_every: int | None = None):
    """Standard single-model training used to produce the FGE starting point.

    The step schedule divides ``lr`` by 10 at 50% and again at 75% of the
    budget. Zero epochs returns the seeded initialization.
    """
    return train_model(config, dataset, epochs, lr, batch_size, seed, momentum,
                       snapshot_every=snapshot_every)


def fge_run(w_start, config: nn.MLPConfig, dataset, cfg: FGERunConfig) -> FGEResult:
    """Cyclic-LR SGD from ``w_start``, collecting weights when ``i mod c == c/2``."""
    c = cfg.schedule.cycle
    if cfg.n_iterations < c // 2:
        raise ValueError(
            f"{cfg.n_iterations} iterations is shorter than half a cycle ({c // 2}); "
            "no checkpoint would be collected"
        )
    w_start = config.check(w_start).copy()
    rng = np.random.default_rng(cfg.seed)
    stream = MinibatchStream(len(dataset), cfg.batch_size, rng)
    checkpoints, collected = [], []
    lrs = np.empty(cfg.n_iterations)
    losses = np.empty(cfg.n_iterations)
    dists = np.empty(cfg.n_iterations)

    def collect(i, w, value, a):
        lrs[i - 1] = a
        losses[i - 1] = value
        dists[i - 1] = np.linalg.norm(w - w_start)
        if i % c == c // 2:
            checkpoints.append(w.copy())
            collected.append(i)

    sgd(w_start, config, dataset, cfg.n_iterations, lambda i: lr_at(cfg.schedule, i),
        cfg.batch_size, rng, cfg.momentum, collect, stream)
    return FGEResult(checkpoints, collected, lrs, losses, dists)


def fge_multi(starts, config: nn.MLPConfig, dataset, cfg: FGERunConfig) -> FGEResult:
    """Run FGE from several starting points (seeds offset per start) and pool the models."""
    runs = [fge_run(w, config, dataset, FGERunConfig(cfg.n_iterations, cfg.schedule,
                                                     cfg.batch_size, cfg.seed + k, cfg.momentum))
            for k, w in enumerate(starts)]
    return FGEResult(
        [w for r in runs for w in r.checkpoints],
        [i for r in runs for i in r.collected_at],
        np.concatenate([r.lrs for r in runs]),
        np.concatenate([r.losses for r in runs]),
        np.concatenate([r.distances for r in runs]),
    )


def ensemble_members(result: FGEResult, w_start=None, include_start: bool = True) -> list:
    members = list(result.checkpoints)
    if include_start and w_start is not None:
        members.insert(0, np.asarray(w_start))
    return members


@dataclass
class ChainReport:
    s: np.ndarray        # position along the chain; knot k sits at s = k
    metrics: dict
    knots: np.ndarray    # row indices of the checkpoints themselves

    def columns(self):
        return {"s": self.s, **{m: self.metrics[m] for m in METRICS},
                "is_knot": np.isin(np.arange(len(self.s)), self.knots).astype(int)}

    def to_dict(self):
        return {"knots": self.knots, "rows": self.columns()}


def fge_chain_report(checkpoints, config: nn.MLPConfig, train, test,
                     points_per_segment: int = 10) -> ChainReport:
    """Metrics along the polygonal chain through consecutive FGE checkpoints."""
    if len(checkpoints) < 2:
        raise ValueError("a chain needs at least two checkpoints")
    if points_per_segment < 1:
        raise ValueError("points_per_segment must be >= 1")
    rows, s, knots = [], [], []
    for k in range(len(checkpoints) - 1):
        a, b = checkpoints[k], checkpoints[k + 1]
        for j in range(points_per_segment):
            frac = j / points_per_segment
            if j == 0:
                knots.append(len(s))
                w = np.asarray(a)
            else:
                w = (1.0 - frac) * a + frac * b
            rows.append(evaluate_point(w, config, train, test))
            s.append(k + frac)
    knots.append(len(s))
    rows.append(evaluate_point(np.asarray(checkpoints[-1]), config, train, test))
    s.append(float(len(checkpoints) - 1))
    metrics = {m: np.array([r[m] for r in rows]) for m in METRICS}
    return ChainReport(np.array(s), metrics, np.array(knots))
