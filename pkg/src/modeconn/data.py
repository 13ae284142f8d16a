"""Datasets, synthetic generators, checkpoint files and report writers."""
from __future__ import annotations

import base64
import binascii
import csv
import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .nn import MLPConfig

FORMAT_VERSION = 1
PAYLOAD_ENCODING = "base64-float64-le"


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    split: str = "train"
    norm_mean: np.ndarray | None = field(default=None, repr=False)
    norm_scale: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if y.shape != (X.shape[0],):
            raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if len(y) and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return len(self.labels)

    @property
    def X(self):
        return self.features

    @property
    def y(self):
        return self.labels

    def subset(self, idx) -> "Dataset":
        return replace(self, features=self.features[idx], labels=self.labels[idx])

    def normalized_with(self, mean, scale) -> "Dataset":
        mean = np.asarray(mean, dtype=np.float64)
        scale = np.asarray(scale, dtype=np.float64)
        return replace(
            self, features=(self.features - mean) / scale, norm_mean=mean, norm_scale=scale
        )


class DataError(ValueError):
    pass


def fit_normalization(dataset: Dataset):
    """Per-feature mean and scale (std, with 1 for constant columns)."""
    mean = dataset.features.mean(axis=0)
    scale = dataset.features.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def normalize_splits(train: Dataset, *others: Dataset):
    """Normalize every split with statistics fitted on ``train`` only."""
    mean, scale = fit_normalization(train)
    return tuple(d.normalized_with(mean, scale) for d in (train, *others))


def load_csv(path, label_column: str, n_classes: int | None = None, split: str = "train") -> Dataset:
    """Parse a numeric CSV with a header row. Labels must be integer class ids."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if label_column not in header:
            raise DataError(f"{path}: no label column {label_column!r} in header {header}")
        li = header.index(label_column)
        rows, labels = [], []
        for r, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{r}: expected {len(header)} cells, got {len(row)}")
            feats = []
            for ci, cell in enumerate(row):
                cell = cell.strip()
                if ci == li:
                    if cell == "":
                        raise DataError(f"{path}:{r}: missing label in column {label_column!r}")
                    try:
                        lab = float(cell)
                    except ValueError:
                        raise DataError(f"{path}:{r}: label {cell!r} is not numeric") from None
                    if lab != int(lab) or lab < 0:
                        raise DataError(f"{path}:{r}: label {cell!r} is not a class index")
                    labels.append(int(lab))
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{r}: non-numeric value {cell!r} in column {header[ci]!r}"
                    ) from None
            rows.append(feats)
    if not rows:
        raise DataError(f"{path}: no data rows")
    labels = np.array(labels, dtype=np.int64)
    k = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    if labels.max() >= k:
        bad = int(np.argmax(labels >= k)) + 2
        raise DataError(f"{path}:{bad}: label {labels[bad - 2]} out of range for {k} classes")
    return Dataset(np.array(rows, dtype=np.float64), labels, max(k, 2), split)


def read_idx(path) -> np.ndarray:
    """Read an uncompressed IDX (MNIST format) file."""
    dtypes = {0x08: ">u1", 0x09: ">i1", 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0 or raw[2] not in dtypes:
        raise DataError(f"{path}: not an IDX file")
    ndim = raw[3]
    shape = struct.unpack(">" + "I" * ndim, raw[4:4 + 4 * ndim])
    data = np.frombuffer(raw, dtype=dtypes[raw[2]], offset=4 + 4 * ndim)
    if data.size != math.prod(shape):
        raise DataError(f"{path}: payload does not match shape {shape}")
    return data.reshape(shape)


def load_idx_pair(images_path, labels_path, split="train") -> Dataset:
    images = read_idx(images_path).astype(np.float64)
    labels = read_idx(labels_path).astype(np.int64)
    X = images.reshape(images.shape[0], -1) / 255.0
    return Dataset(X, labels, int(labels.max()) + 1, split)


def _balanced_labels(n, k):
    return np.repeat(np.arange(k), [n // k + (1 if c < n % k else 0) for c in range(k)])


def gen_synthetic(kind: str, n: int, noise: float, seed: int, n_classes: int = 2,
                  turns: float = 1.0, split: str = "train") -> Dataset:
    """Deterministic 2-D toy classification data with balanced classes.

    ``two_spirals``: two interleaved Archimedean spirals making ``turns``
    revolutions, with isotropic Gaussian noise of std ``noise``.
    ``gaussian_blobs``: ``n_classes`` isotropic blobs with std ``noise``
    centered on a circle of radius 3.
    """
    if n < 4:
        raise ValueError("need at least 4 samples")
    rng = np.random.default_rng(seed)
    if kind == "two_spirals":
        y = _balanced_labels(n, 2)
        k = 2
        r = np.sqrt(rng.uniform(0.0, 1.0, n)) * 0.95 + 0.05
        angle = r * turns * 2.0 * np.pi + np.pi * y
        X = np.column_stack([r * np.cos(angle), r * np.sin(angle)])
    elif kind == "gaussian_blobs":
        k = int(n_classes)
        if k < 2:
            raise ValueError("need at least 2 classes")
        y = _balanced_labels(n, k)
        phi = 2.0 * np.pi * np.arange(k) / k
        centers = 3.0 * np.column_stack([np.cos(phi), np.sin(phi)])
        X = centers[y].copy()
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    X = X + noise * rng.standard_normal(X.shape)
    perm = rng.permutation(n)
    return Dataset(X[perm], y[perm], k, split)


# --- checkpoints ---------------------------------------------------------


class CheckpointError(ValueError):
    """Invalid checkpoint file; ``code`` names the failed check."""

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code


def encode_vector(w) -> str:
    return base64.b64encode(np.asarray(w, dtype="<f8").tobytes()).decode("ascii")


def decode_vector(payload: str, expected: int) -> np.ndarray:
    try:
        raw = base64.b64decode(payload.encode("ascii"), validate=True)
    except (binascii.Error, ValueError, AttributeError) as exc:
        raise CheckpointError("payload", f"corrupt base64 payload: {exc}") from None
    if len(raw) != 8 * expected:
        raise CheckpointError(
            "count", f"payload holds {len(raw)} bytes, expected {8 * expected} "
                     f"({expected} float64 values)"
        )
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


@dataclass
class CheckpointFile:
    weights: np.ndarray
    config: MLPConfig
    seed: int | None = None
    format_version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)


def _header(config: MLPConfig, seed, kind: str) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "architecture": config.to_dict(),
        "seed": seed,
        "param_count": config.param_count,
        "encoding": PAYLOAD_ENCODING,
    }


def save_checkpoint(w, config: MLPConfig, path, seed: int | None = None, extra: dict | None = None):
    w = config.check(w)
    doc = _header(config, seed, "weights")
    if extra:
        doc["extra"] = extra
    doc["payload"] = encode_vector(w)
    Path(path).write_text(json.dumps(doc, indent=1))


def _read_header(path, kind: str):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError("format", f"{path}: not JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise CheckpointError("format", f"{path}: top level must be an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            "version", f"{path}: format_version {doc.get('format_version')!r}, "
                       f"this reader supports {FORMAT_VERSION}"
        )
    if doc.get("kind", "weights") != kind:
        raise CheckpointError("format", f"{path}: holds a {doc.get('kind')!r}, expected {kind!r}")
    if doc.get("encoding") != PAYLOAD_ENCODING:
        raise CheckpointError("payload", f"{path}: unsupported encoding {doc.get('encoding')!r}")
    try:
        config = MLPConfig.from_dict(doc["architecture"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError("architecture", f"{path}: bad architecture record: {exc}") from None
    count = doc.get("param_count")
    if count != config.param_count:
        raise CheckpointError(
            "architecture", f"{path}: architecture implies {config.param_count} parameters "
                            f"but param_count is {count!r}"
        )
    return doc, config


def load_checkpoint(path) -> CheckpointFile:
    doc, config = _read_header(path, "weights")
    w = decode_vector(doc.get("payload", ""), config.param_count)
    return CheckpointFile(w, config, doc.get("seed"), doc["format_version"], doc.get("extra", {}))


def save_curve(spec, config: MLPConfig, path, seed: int | None = None, extra: dict | None = None):
    """Store a curve's control points (start, bends..., end) in one file."""
    doc = _header(config, seed, "curve")
    doc["curve_kind"] = spec.kind
    if extra:
        doc["extra"] = extra
    doc["points"] = [encode_vector(config.check(p)) for p in spec.control_points()]
    Path(path).write_text(json.dumps(doc, indent=1))


def load_curve(path):
    from .curves import CurveSpec

    doc, config = _read_header(path, "curve")
    pts = [decode_vector(p, config.param_count) for p in doc.get("points", [])]
    if len(pts) < 2:
        raise CheckpointError("count", f"{path}: a curve needs at least two control points")
    spec = CurveSpec(doc.get("curve_kind"), pts[0], pts[-1], pts[1:-1])
    return spec, config, doc.get("seed")


# --- reports -------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_table(columns: dict, path):
    """CSV with one column per key, floats at 17 significant digits."""
    names = list(columns)
    n = len(columns[names[0]])
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(n):
            w.writerow([_fmt(columns[c][i]) for c in names])


def read_table(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[j]) for r in body]) for j, h in enumerate(header)}


def write_report(report, path, format: str = "csv"):
    """Serialize any report object exposing ``columns()`` and ``to_dict()``."""
    if format == "csv":
        write_table(report.columns(), path)
    elif format == "json":
        Path(path).write_text(json.dumps(_jsonable(report.to_dict()), indent=1))
    else:
        raise ValueError(f"unknown report format {format!r}")


def write_json(obj, path):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=1))
