"""Evaluating curves, planes and ensembles of networks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .curve_train import arclength_mean, speeds_on_grid, uniform_t_mean
from .curves import CurveSpec, arclength, point_at, t_grid

METRICS = ("train_loss", "train_error", "test_loss", "test_error")


def evaluate_point(w, config: nn.MLPConfig, train, test):
    """Train loss (regularized), train error, test loss (NLL), test error.

    BN statistics for ``w`` are recomputed on ``train`` and used for both sets.
    """
    stats = nn.eval_stats(w, config, train.features)
    train_err, _, _ = nn.predict_eval(w, config, train.features, train.labels, stats)
    train_loss = nn.loss(w, config, train.features, train.labels, stats)
    test_err, test_nll, _ = nn.predict_eval(w, config, test.features, test.labels, stats)
    return {"train_loss": train_loss, "train_error": train_err,
            "test_loss": test_nll, "test_error": test_err}


def aggregate(ts, values, speeds) -> dict:
    values = np.asarray(values, dtype=np.float64)
    return {
        "min": float(values.min()),
        "max": float(values.max()),
        "int": arclength_mean(ts, values, speeds),
        "mean": uniform_t_mean(ts, values),
    }


@dataclass
class CurveEvalReport:
    t: np.ndarray
    metrics: dict
    aggregates: dict
    length_ratio: float | None
    speeds: np.ndarray = field(repr=False, default=None)
    kind: str = ""

    def columns(self):
        return {"t": self.t, **{m: self.metrics[m] for m in METRICS}}

    def to_dict(self):
        return {
            "kind": self.kind,
            "grid_size": len(self.t),
            "length_ratio": self.length_ratio,
            "aggregates": self.aggregates,
            "rows": self.columns(),
        }


def curve_report(spec: CurveSpec, config: nn.MLPConfig, train, test,
                 grid_size: int = 121) -> CurveEvalReport:
    ts = t_grid(grid_size)
    rows = [evaluate_point(point_at(spec, t), config, train, test) for t in ts]
    metrics = {m: np.array([r[m] for r in rows]) for m in METRICS}
    speeds = speeds_on_grid(spec, ts)
    aggs = {m: aggregate(ts, metrics[m], speeds) for m in METRICS}
    try:
        ratio = arclength(spec, grid_size)[1]
    except ValueError:
        ratio = None
    return CurveEvalReport(ts, metrics, aggs, ratio, speeds, spec.kind)


# --- planes --------------------------------------------------------------


@dataclass
class PlaneGrid:
    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    loss: np.ndarray  # shape (len(ys), len(xs))
    error: np.ndarray | None = None
    anchors: np.ndarray | None = None  # plane coordinates of the three defining points

    def point(self, x: float, y: float) -> np.ndarray:
        return self.origin + x * self.u + y * self.v

    def project(self, w) -> tuple:
        d = np.asarray(w) - self.origin
        return float(d @ self.u), float(d @ self.v)

    def columns(self):
        gx, gy = np.meshgrid(self.xs, self.ys)
        cols = {"x": gx.ravel(), "y": gy.ravel(), "loss": self.loss.ravel()}
        if self.error is not None:
            cols["error"] = self.error.ravel()
        return cols

    def to_dict(self):
        return {
            "xs": self.xs, "ys": self.ys, "loss": self.loss, "error": self.error,
            "anchors": self.anchors,
        }


def plane_basis(w1, w2, w3, tol: float = 1e-10):
    """Orthonormal ``(u, v)`` spanning the plane through three points.

    ``u`` points from ``w1`` to ``w2``; ``v`` is the Gram-Schmidt remainder of
    ``w3 - w1``.
    """
    w1, w2, w3 = (np.asarray(w, dtype=np.float64) for w in (w1, w2, w3))
    u = w2 - w1
    du = float(u @ u)
    if du == 0.0:
        raise ValueError("w1 and w2 coincide; the plane is undefined")
    d3 = w3 - w1
    v = d3 - (d3 @ u) / du * u
    nv = float(np.linalg.norm(v))
    if nv <= tol * max(float(np.linalg.norm(d3)), math.sqrt(du)):
        raise ValueError(
            f"points are collinear (residual {nv:.3g} after removing the w1->w2 direction)"
        )
    return u / math.sqrt(du), v / nv


def plane_grid(w1, w2, w3, config: nn.MLPConfig, dataset, resolution: int = 21,
               margin: float = 0.2, with_error: bool = True, bn_data=None) -> PlaneGrid:
    """Loss (and error) on a Cartesian grid in the plane of three weight vectors.

    The grid covers the bounding box of the three points' plane coordinates,
    widened by ``margin`` times its extent on every side.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    u, v = plane_basis(w1, w2, w3)
    origin = np.asarray(w1, dtype=np.float64).copy()
    anchors = np.array([[(np.asarray(w) - origin) @ u, (np.asarray(w) - origin) @ v]
                        for w in (w1, w2, w3)])
    lo, hi = anchors.min(axis=0), anchors.max(axis=0)
    span = hi - lo
    xs = np.linspace(lo[0] - margin * span[0], hi[0] + margin * span[0], resolution)
    ys = np.linspace(lo[1] - margin * span[1], hi[1] + margin * span[1], resolution)
    grid = PlaneGrid(origin, u, v, xs, ys, np.empty((len(ys), len(xs))),
                     np.empty((len(ys), len(xs))) if with_error else None, anchors)
    bn_X = (dataset if bn_data is None else bn_data).features
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            w = grid.point(x, y)
            stats = nn.eval_stats(w, config, bn_X)
            grid.loss[j, i] = nn.loss(w, config, dataset.features, dataset.labels, stats)
            if with_error:
                grid.error[j, i] = nn.predict_eval(
                    w, config, dataset.features, dataset.labels, stats)[0]
    return grid


# --- ensembles -----------------------------------------------------------


def _as_member(m):
    if isinstance(m, tuple):
        return m[0], m[1]
    return m, None


def model_logits(models, config: nn.MLPConfig, X, bn_data=None) -> list:
    """Logits of every model; BN stats come with the model or from ``bn_data``."""
    out = []
    for m in models:
        w, stats = _as_member(m)
        if config.batch_norm and stats is None:
            if bn_data is None:
                raise ValueError("batch-normalized members need stats or bn_data")
            stats = nn.bn_recompute_stats(w, config, bn_data.features)
        out.append(nn.forward(w, config, X, stats))
    return out


def ensemble_from_logits(logit_sets, labels, temperature: float = 1.0):
    """Average the per-model softmax probabilities; returns ``(error, nll, probs)``."""
    if len(logit_sets) == 0:
        raise ValueError("empty ensemble")
    probs = np.mean([nn.softmax(np.asarray(z) / temperature) for z in logit_sets], axis=0)
    labels = np.asarray(labels)
    error = float(np.mean(np.argmax(probs, axis=1) != labels))
    picked = probs[np.arange(len(labels)), labels]
    nll = float(-np.mean(np.log(np.maximum(picked, np.finfo(float).tiny))))
    return error, nll, probs


def ensemble_predict(models, config: nn.MLPConfig, dataset, temperature: float = 1.0,
                     bn_data=None):
    """Error, NLL and averaged probabilities of an ensemble on ``dataset``.

    ``models`` holds weight vectors or ``(weights, BatchNormStats)`` pairs.
    """
    if len(models) == 0:
        raise ValueError("empty ensemble")
    logits = model_logits(models, config, dataset.features, bn_data)
    return ensemble_from_logits(logits, dataset.labels, temperature)


def curve_point_ensemble(spec: CurveSpec, config: nn.MLPConfig, dataset, t: float,
                         bn_data=None) -> float:
    """Test error of the two-network ensemble ``{phi(0), phi(t)}``."""
    members = [point_at(spec, 0.0), point_at(spec, t)]
    return ensemble_predict(members, config, dataset, bn_data=bn_data)[0]


def predictions(w, config: nn.MLPConfig, X, stats=None) -> np.ndarray:
    return np.argmax(nn.forward(w, config, X, stats), axis=1)


def disagreement(w_a, w_b, config: nn.MLPConfig, dataset, bn_data=None) -> float:
    """Fraction of examples on which two networks predict different labels."""
    la, lb = model_logits([w_a, w_b], config, dataset.features, dataset if bn_data is None else bn_data)
    return float(np.mean(np.argmax(la, axis=1) != np.argmax(lb, axis=1)))


# --- temperature scaling -------------------------------------------------


@dataclass
class TemperatureFit:
    temperature: float
    nll: float
    nll_at_one: float
    degenerate: bool = False


def _golden_section(f, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def fit_temperature(logit_sets, labels, t_min: float = 0.05, t_max: float = 20.0,
                    tol: float = 1e-9) -> TemperatureFit:
    """One shared temperature minimizing the held-out NLL of the averaged
    tempered probabilities, by golden-section search over ``ln T``.

    If every row of every logit matrix is constant the temperature has no
    effect; ``T = 1`` is returned with ``degenerate=True``.
    """
    logit_sets = [np.asarray(z, dtype=np.float64) for z in logit_sets]
    labels = np.asarray(labels)
    if not logit_sets or len(labels) == 0:
        raise ValueError("need at least one model and one held-out example")

    def nll(log_t):
        return ensemble_from_logits(logit_sets, labels, math.exp(log_t))[1]

    base = nll(0.0)
    if all(np.ptp(z, axis=1).max() == 0.0 for z in logit_sets):
        return TemperatureFit(1.0, base, base, degenerate=True)
    lo, hi = math.log(t_min), math.log(t_max)
    best = _golden_section(nll, lo, hi, tol)
    # guard against a non-unimodal objective: never worse than the bracket ends or T=1
    candidates = [(nll(x), x) for x in (best, lo, hi)] + [(base, 0.0)]
    value, log_t = min(candidates)
    return TemperatureFit(math.exp(log_t), value, base)
