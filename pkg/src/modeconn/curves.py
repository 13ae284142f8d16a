"""Parametric curves in weight space.

Every curve here is an affine combination of its control points::

    phi(t) = sum_k c_k(t) * p_k,   p = (start, bend_1, ..., bend_n, end)

so evaluation, the gradient w.r.t. the bends and the velocity all reduce to
computing a short coefficient vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("segment", "polychain", "bezier")


@dataclass
class CurveSpec:
    kind: str
    start: np.ndarray
    end: np.ndarray
    bends: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}; expected one of {KINDS}")
        self.start = np.asarray(self.start, dtype=np.float64)
        self.end = np.asarray(self.end, dtype=np.float64)
        self.bends = [np.asarray(b, dtype=np.float64) for b in self.bends]
        if self.start.ndim != 1 or self.start.shape != self.end.shape:
            raise ValueError("endpoints must be 1-D vectors of equal length")
        for b in self.bends:
            if b.shape != self.start.shape:
                raise ValueError(
                    f"bend has shape {b.shape}, endpoints have {self.start.shape}"
                )
        if self.kind == "segment" and self.bends:
            raise ValueError("a segment has no bends")
        if self.kind != "segment" and not self.bends:
            raise ValueError(f"a {self.kind} needs at least one bend")

    @property
    def n_bends(self) -> int:
        return len(self.bends)

    @property
    def dim(self) -> int:
        return self.start.shape[0]

    def control_points(self) -> list:
        return [self.start, *self.bends, self.end]

    def with_bends(self, bends) -> "CurveSpec":
        return CurveSpec(self.kind, self.start, self.end, [np.array(b) for b in bends])


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return t


def _polychain_segment(n_bends: int, t: float) -> int:
    # a knot t = k/(n+1) belongs to the segment on its left
    return min(max(math.ceil(t * (n_bends + 1)) - 1, 0), n_bends)


def coefficients(kind: str, n_bends: int, t: float) -> np.ndarray:
    """Affine weights of ``(start, bend_1..bend_n, end)`` at parameter ``t``."""
    t = _check_t(t)
    if kind == "segment":
        if n_bends != 0:
            raise ValueError("a segment has no bends")
        return np.array([1.0 - t, t])
    if kind not in KINDS:
        raise ValueError(f"unknown curve kind {kind!r}")
    if n_bends < 1:
        raise ValueError(f"a {kind} needs at least one bend")
    m = n_bends + 1
    c = np.zeros(m + 1)
    if kind == "polychain":
        i = _polychain_segment(n_bends, t)
        c[i] = (i + 1) - m * t
        c[i + 1] = m * t - i
    else:
        for i in range(m + 1):
            c[i] = math.comb(m, i) * t**i * (1.0 - t) ** (m - i)
    return c


def velocity_coefficients(kind: str, n_bends: int, t: float) -> np.ndarray:
    """Derivatives ``dc_k/dt`` so that ``phi'(t) = sum_k dc_k * p_k``."""
    t = _check_t(t)
    if kind == "segment":
        return np.array([-1.0, 1.0])
    m = n_bends + 1
    d = np.zeros(m + 1)
    if kind == "polychain":
        i = _polychain_segment(n_bends, t)
        d[i], d[i + 1] = -m, m
        return d
    # d/dt B_{i,m} = m (B_{i-1,m-1} - B_{i,m-1})
    lower = [math.comb(m - 1, j) * t**j * (1.0 - t) ** (m - 1 - j) for j in range(m)]
    for i in range(m + 1):
        left = lower[i - 1] if i >= 1 else 0.0
        right = lower[i] if i <= m - 1 else 0.0
        d[i] = m * (left - right)
    return d


def _combine(points, coeffs) -> np.ndarray:
    # zero coefficients are skipped so endpoints come out bit-exact
    out = None
    for c, p in zip(coeffs, points):
        if c == 0.0:
            continue
        term = p * c if c != 1.0 else p.copy()
        out = term if out is None else out + term
    return np.zeros_like(points[0]) if out is None else out


def point_at(spec: CurveSpec, t: float) -> np.ndarray:
    return _combine(spec.control_points(), coefficients(spec.kind, spec.n_bends, t))


def velocity_at(spec: CurveSpec, t: float) -> np.ndarray:
    return _combine(spec.control_points(), velocity_coefficients(spec.kind, spec.n_bends, t))


def speed_at(spec: CurveSpec, t: float) -> float:
    """``||phi'(t)||`` from the analytic parametrization."""
    return float(np.linalg.norm(velocity_at(spec, t)))


def backprop_to_bends(spec: CurveSpec, t: float, grad_phi) -> list:
    """Map ``dL/dphi`` at ``phi(t)`` to ``dL/dbend_k``.

    The Jacobian of ``phi(t)`` w.r.t. each bend is a scalar multiple of the
    identity, so this is one scale per bend. Endpoints are fixed and get none.
    """
    grad_phi = np.asarray(grad_phi, dtype=np.float64)
    if grad_phi.shape != spec.start.shape:
        raise ValueError(f"gradient has shape {grad_phi.shape}, expected {spec.start.shape}")
    c = coefficients(spec.kind, spec.n_bends, t)
    return [c[k + 1] * grad_phi for k in range(spec.n_bends)]


def t_grid(grid_size: int = 121) -> np.ndarray:
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    return np.linspace(0.0, 1.0, grid_size)


def arclength(spec: CurveSpec, grid_size: int = 121):
    """Polyline length over an even t-grid and its ratio to ``||end - start||``."""
    ts = t_grid(grid_size)
    pts = np.stack([point_at(spec, t) for t in ts])
    length = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    chord = float(np.linalg.norm(spec.end - spec.start))
    if chord == 0.0:
        raise ValueError("coincident endpoints: length ratio is undefined")
    return length, length / chord


def init_bends(start, end, n: int, jitter: float = 0.0, seed: int | None = None) -> list:
    """Bends at fractions k/(n+1) of the segment, optionally with Gaussian jitter."""
    if n < 1:
        raise ValueError("need at least one bend")
    start = np.asarray(start, dtype=np.float64)
    end = np.asarray(end, dtype=np.float64)
    bends = [start + (k / (n + 1)) * (end - start) for k in range(1, n + 1)]
    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        bends = [b + jitter * rng.standard_normal(b.shape) for b in bends]
    return bends


def make_curve(kind: str, start, end, n_bends: int = 1, jitter: float = 0.0, seed=None):
    if kind == "segment":
        return CurveSpec("segment", start, end)
    return CurveSpec(kind, start, end, init_bends(start, end, n_bends, jitter, seed))
