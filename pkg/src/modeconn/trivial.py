"""Paths through the origin that only rescale a ReLU network.

Scaling layer ``i`` weights by ``t`` and its bias by ``t**i`` multiplies the
logits by ``t**n`` (``n`` layers), so predictions are unchanged for any
``t > 0``. These paths connect any two networks without passing through
new functions and serve as a control for genuinely diverse curves.
"""
from __future__ import annotations

import numpy as np

from . import nn


def _require_plain(config: nn.MLPConfig):
    if config.batch_norm:
        raise ValueError("layer rescaling does not preserve predictions under batch norm")


def trivial_point(w, config: nn.MLPConfig, t: float) -> np.ndarray:
    _require_plain(config)
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    w = config.check(w)
    if t == 1.0:
        return w.copy()
    out = np.empty_like(w)
    for s in config.slots:
        sl = slice(s.offset, s.offset + s.size)
        scale = t if s.name == "W" else t ** (s.layer + 1)
        out[sl] = w[sl] * scale
    return out


def trivial_path(w_a, w_b, config: nn.MLPConfig, s: float) -> np.ndarray:
    """Point ``s`` in [0, 1] on the path ``w_a -> 0 -> w_b``.

    Predictions are undefined exactly at ``s = 0.5`` (the origin).
    """
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    if s <= 0.5:
        return trivial_point(w_a, config, 1.0 - 2.0 * s)
    return trivial_point(w_b, config, 2.0 * s - 1.0)


def trivial_check(w, config: nn.MLPConfig, X, t_grid, y=None) -> dict:
    """Check prediction invariance and the ``t**n`` logit identity along the path.

    With labels ``y`` the per-t error rate and regularized loss are reported too.
    """
    _require_plain(config)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if np.any(t_grid <= 0.0) or np.any(t_grid > 1.0):
        raise ValueError("t values must lie in (0, 1]")
    base = nn.forward(w, config, X)
    labels = np.argmax(base, axis=1)
    n = config.n_layers
    invariant = True
    worst = 0.0
    errors, losses = [], []
    # relative to each example's largest logit magnitude
    scale = np.maximum(np.abs(base).max(axis=1, keepdims=True), np.finfo(float).tiny)
    for t in t_grid:
        wt = trivial_point(w, config, t)
        z = nn.forward(wt, config, X)
        invariant &= bool(np.array_equal(np.argmax(z, axis=1), labels))
        expected = t**n * base
        worst = max(worst, float(np.max(np.abs(z - expected) / (t**n * scale))))
        if y is not None:
            errors.append(float(np.mean(np.argmax(z, axis=1) != y)))
            losses.append(nn.loss(wt, config, X, y))
    report = {"t": t_grid, "argmax_invariant": invariant, "logit_ratio_error": worst}
    if y is not None:
        report["error"] = np.array(errors)
        report["loss"] = np.array(losses)
    return report
