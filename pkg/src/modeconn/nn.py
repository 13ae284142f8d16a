"""Small fully-connected ReLU network with analytic gradients.

Weights live in a single flat float64 vector. The per-layer layout is owned by
:class:`MLPConfig`, so any point in weight space (an endpoint, a curve bend, a
point on a plane) is just a 1-D array of length ``config.param_count``.

Per layer ``i`` the vector stores ``W_i`` with shape ``(fan_in, fan_out)``
followed by ``b_i``. Hidden layers of a batch-normalized network store
``gamma_i`` and ``beta_i`` instead of ``b_i`` (the shift ``beta_i`` makes a
pre-normalization bias redundant).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

BN_EPS = 1e-5


class ParamSlot(NamedTuple):
    layer: int
    name: str  # "W", "b", "gamma" or "beta"
    shape: tuple
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


@dataclass(frozen=True)
class MLPConfig:
    layer_sizes: tuple
    activation: str = "relu"
    batch_norm: bool = False
    l2_coeff: float = 0.0
    slots: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if sizes[-1] < 2:
            raise ValueError("output layer must have at least 2 classes")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.l2_coeff < 0:
            raise ValueError("l2_coeff must be non-negative")
        object.__setattr__(self, "layer_sizes", sizes)

        slots = []
        offset = 0
        n_layers = len(sizes) - 1
        for i in range(n_layers):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            hidden = i < n_layers - 1
            names = [("W", (fan_in, fan_out))]
            if self.batch_norm and hidden:
                names += [("gamma", (fan_out,)), ("beta", (fan_out,))]
            else:
                names.append(("b", (fan_out,)))
            for name, shape in names:
                slot = ParamSlot(i, name, shape, offset)
                slots.append(slot)
                offset += slot.size
        object.__setattr__(self, "slots", tuple(slots))

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def param_count(self) -> int:
        last = self.slots[-1]
        return last.offset + last.size

    def unpack(self, w: np.ndarray) -> list[dict]:
        """Split a flat weight vector into per-layer dicts of array views."""
        w = self.check(w)
        layers = [{} for _ in range(self.n_layers)]
        for s in self.slots:
            layers[s.layer][s.name] = w[s.offset:s.offset + s.size].reshape(s.shape)
        return layers

    def pack(self, layers: Sequence[dict]) -> np.ndarray:
        w = np.empty(self.param_count)
        for s in self.slots:
            w[s.offset:s.offset + s.size] = np.asarray(layers[s.layer][s.name]).ravel()
        return w

    def check(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.param_count,):
            raise ValueError(
                f"weight vector has shape {w.shape}, expected ({self.param_count},)"
            )
        return w

    def weight_mask(self) -> np.ndarray:
        """Boolean mask selecting the weight-matrix entries (the L2-penalized part)."""
        mask = np.zeros(self.param_count, dtype=bool)
        for s in self.slots:
            if s.name == "W":
                mask[s.offset:s.offset + s.size] = True
        return mask

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "activation": self.activation,
            "batch_norm": self.batch_norm,
            "l2_coeff": self.l2_coeff,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLPConfig":
        return cls(
            layer_sizes=tuple(d["layer_sizes"]),
            activation=d.get("activation", "relu"),
            batch_norm=bool(d.get("batch_norm", False)),
            l2_coeff=float(d.get("l2_coeff", 0.0)),
        )


@dataclass
class BatchNormStats:
    """Per-BN-layer normalization statistics, ordered by hidden layer."""

    means: list
    stds: list
    eps: float = BN_EPS


def init_params(config: MLPConfig, seed: int) -> np.ndarray:
    """He fan-in normal weights, zero biases, unit gamma, zero beta."""
    rng = np.random.default_rng(seed)
    w = np.zeros(config.param_count)
    for s in config.slots:
        sl = slice(s.offset, s.offset + s.size)
        if s.name == "W":
            w[sl] = rng.standard_normal(s.size) * np.sqrt(2.0 / s.shape[0])
        elif s.name == "gamma":
            w[sl] = 1.0
    return w


def _check_inputs(config: MLPConfig, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != config.layer_sizes[0]:
        raise ValueError(
            f"inputs have shape {X.shape}, expected (batch, {config.layer_sizes[0]})"
        )
    return X


def _forward(w, config, X, stats, keep):
    layers = config.unpack(w)
    X = _check_inputs(config, X)
    h = X
    cache = []
    batch_means, batch_stds = [], []
    for i, p in enumerate(layers):
        z = h @ p["W"]
        if i == config.n_layers - 1:
            z = z + p["b"]
            if keep:
                cache.append({"h": h})
            return z, cache, BatchNormStats(batch_means, batch_stds)
        entry = {"h": h}
        if config.batch_norm:
            if stats is None:
                # shifted by the first row so constant columns give exactly zero spread
                d = z - z[0]
                dm = d.mean(axis=0)
                mu = z[0] + dm
                sigma = np.sqrt(((d - dm) ** 2).mean(axis=0))
            else:
                mu, sigma = stats.means[i], stats.stds[i]
            batch_means.append(mu)
            batch_stds.append(sigma)
            denom = sigma + BN_EPS
            xhat = (z - mu) / denom
            a = p["gamma"] * xhat + p["beta"]
            entry.update(z=z, mu=mu, sigma=sigma, denom=denom, xhat=xhat)
        else:
            a = z + p["b"]
        entry["a"] = a
        if keep:
            cache.append(entry)
        h = np.maximum(a, 0.0)


def forward(w, config: MLPConfig, X, stats: BatchNormStats | None = None) -> np.ndarray:
    """Return logits of shape ``(batch, n_classes)``.

    With batch norm enabled and ``stats=None`` the layers normalize with the
    statistics of ``X`` itself (training mode); otherwise ``stats`` is used.
    """
    logits, _, _ = _forward(w, config, X, stats, keep=False)
    return logits


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _check_labels(config, y, n):
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"got {y.shape[0] if y.ndim else 0} labels for {n} rows")
    if n and (y.min() < 0 or y.max() >= config.n_classes):
        raise ValueError(f"labels must lie in [0, {config.n_classes})")
    return y.astype(np.int64)


def l2_penalty(w, config: MLPConfig) -> float:
    ww = np.asarray(w)[config.weight_mask()]
    return config.l2_coeff * float(ww @ ww)


def loss(w, config: MLPConfig, X, y, stats: BatchNormStats | None = None) -> float:
    """Mean cross-entropy plus ``l2_coeff * ||weight matrices||^2``."""
    X = _check_inputs(config, X)
    y = _check_labels(config, y, X.shape[0])
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    logp = log_softmax(forward(w, config, X, stats))
    nll = -logp[np.arange(len(y)), y].mean()
    return float(nll) + l2_penalty(w, config)


def loss_and_grad(w, config: MLPConfig, X, y, stats: BatchNormStats | None = None):
    """Regularized loss and its gradient w.r.t. the flat weight vector.

    Batch-norm layers are differentiated through the mini-batch statistics
    when ``stats`` is None, and treat ``stats`` as constants otherwise.
    """
    w = config.check(w)
    X = _check_inputs(config, X)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    y = _check_labels(config, y, X.shape[0])
    n = X.shape[0]

    logits, cache, _ = _forward(w, config, X, stats, keep=True)
    logp = log_softmax(logits)
    ce = -logp[np.arange(n), y].mean()

    layers = config.unpack(w)
    grads = [dict() for _ in layers]
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n

    for i in range(config.n_layers - 1, -1, -1):
        c = cache[i]
        p = layers[i]
        grads[i]["W"] = c["h"].T @ delta + 2.0 * config.l2_coeff * p["W"]
        if i == config.n_layers - 1:
            grads[i]["b"] = delta.sum(axis=0)
        if i == 0:
            break
        # back through the previous layer's ReLU and (optional) batch norm
        prev = cache[i - 1]
        da = (delta @ p["W"].T) * (prev["a"] > 0)
        q = layers[i - 1]
        if config.batch_norm:
            grads[i - 1]["gamma"] = (da * prev["xhat"]).sum(axis=0)
            grads[i - 1]["beta"] = da.sum(axis=0)
            dxhat = da * q["gamma"]
            if stats is None:
                centered = prev["z"] - prev["mu"]
                sigma = prev["sigma"]
                denom = prev["denom"]
                proj = (dxhat * centered).sum(axis=0)
                safe = np.where(sigma > 0, sigma, 1.0)
                corr = np.where(sigma > 0, proj / (n * safe * denom**2), 0.0)
                delta = (dxhat - dxhat.mean(axis=0)) / denom - centered * corr
            else:
                delta = dxhat / prev["denom"]
        else:
            grads[i - 1]["b"] = da.sum(axis=0)
            delta = da

    total = float(ce) + l2_penalty(w, config)
    return total, config.pack(grads)


def bn_recompute_stats(w, config: MLPConfig, X) -> BatchNormStats:
    """Exact full-data mean and biased std of every BN layer's input.

    Layers are processed in order and each layer is normalized with its own
    full-data statistics before feeding the next one, so a single pass over
    ``X`` suffices.
    """
    if not config.batch_norm:
        raise ValueError("network has no batch normalization layers")
    X = _check_inputs(config, X)
    if X.shape[0] == 0:
        raise ValueError("cannot compute statistics of an empty dataset")
    _, _, stats = _forward(w, config, X, None, keep=False)
    return BatchNormStats([m.copy() for m in stats.means], [s.copy() for s in stats.stds])


def eval_stats(w, config: MLPConfig, X) -> BatchNormStats | None:
    """Statistics for evaluating ``w``: recomputed on ``X`` for BN nets, else None."""
    return bn_recompute_stats(w, config, X) if config.batch_norm else None


def predict_eval(w, config: MLPConfig, X, y, stats: BatchNormStats | None = None):
    """Return ``(error_rate, mean_nll, probabilities)`` on a labeled set.

    A batch-normalized network needs ``stats`` (see :func:`eval_stats`).
    """
    X = _check_inputs(config, X)
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    if config.batch_norm and stats is None:
        raise ValueError("batch-normalized network needs BatchNormStats for evaluation")
    y = _check_labels(config, y, X.shape[0])
    logits = forward(w, config, X, stats)
    return scores_from_logits(logits, y)


def scores_from_logits(logits, y):
    logp = log_softmax(logits)
    probs = np.exp(logp)
    probs /= probs.sum(axis=1, keepdims=True)
    error = float(np.mean(np.argmax(logp, axis=1) != y))
    nll = float(-logp[np.arange(len(y)), y].mean())
    return error, nll, probs
