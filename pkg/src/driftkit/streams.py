"""Ground-truth stream generation and CSV ingestion.

Every benchmark stream is produced here from a named recipe with explicit
parameters and a seed, so runs are exactly reproducible and the true change
points are always known. External data enters through ``ingest_csv``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class UnknownDataset(ValueError):
    pass


class MissingParam(ValueError):
    pass


class ParseError(ValueError):
    pass


class NonMonotoneTime(ValueError):
    pass


@dataclass(frozen=True)
class TimedSample:
    features: np.ndarray
    timestamp: float
    label: int | None = None


@dataclass(frozen=True)
class StreamSpec:
    name: str
    n: int
    seed: int = 0
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LabeledStream:
    """Feature matrix, strictly increasing timestamps, optional labels."""

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray | None = None
    change_points: tuple[float, ...] = ()
    continuous: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.x.shape[0] != self.t.shape[0]:
            raise ValueError("feature and timestamp counts differ")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if self.change_points and not all(
            self.t[0] <= cp <= self.t[-1] for cp in self.change_points
        ):
            raise ValueError("change points must lie within the time range")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    @cached_property
    def samples(self) -> list[TimedSample]:
        labels = self.y if self.y is not None else [None] * len(self)
        return [
            TimedSample(self.x[i], float(self.t[i]),
                        None if labels[i] is None else int(labels[i]))
            for i in range(len(self))
        ]

    def change_indices(self) -> list[int]:
        """First sample index at or after each true change point."""
        return [int(np.searchsorted(self.t, cp)) for cp in self.change_points]


_DEFAULTS = {
    "twister": {"alpha": 1.0, "beta": 4 * math.pi, "sigma": 0.1, "time_range": 1.0},
    "spiral": {"alpha": 1.0, "beta": 4 * math.pi, "sigma": 0.1, "time_range": 1.0},
    "y": {"alpha": 0.5, "time_range": 1.0},
    "square": {"alpha": 1.0, "beta": 1.0, "time_range": 1.0},
    "sea": {
        "thresholds": (8.0, 9.5, 7.0, 9.0),
        "label_noise": 0.0,
        "time_range": 1.0,
    },
    "rplane": {
        "angles_deg": (0.0, 30.0, 75.0, 105.0),
        "label_noise": 0.0,
        "time_range": 1.0,
    },
    "fool_error": {
        "sep": 2.0, "sigma": 0.5, "minority": 0.1, "shift": 3.0, "time_range": 1.0,
    },
    "fool_marginal": {"arm": 2.0, "sigma": 0.4, "time_range": 1.0},
}

DATASETS = tuple(sorted(_DEFAULTS))

_CONTINUOUS = {"twister", "spiral", "square"}


def _resolve_params(spec: StreamSpec) -> dict:
    if spec.name not in _DEFAULTS:
        raise UnknownDataset(
            f"unknown dataset {spec.name!r}; valid names: {', '.join(DATASETS)}"
        )
    params = dict(_DEFAULTS[spec.name])
    unknown = set(spec.params) - set(params) - {"arrivals"}
    if unknown:
        raise MissingParam(
            f"unsupported parameter(s) for {spec.name}: {sorted(unknown)}"
        )
    params.update(spec.params)
    return params


def _timestamps(spec: StreamSpec, params: dict, rng: np.random.Generator) -> np.ndarray:
    span = float(params["time_range"])
    if params.get("arrivals", "uniform") == "poisson":
        gaps = rng.exponential(1.0, size=spec.n)
        t = np.cumsum(gaps)
        return t * (span / t[-1])
    return np.arange(spec.n) / spec.n * span


def generate(spec: StreamSpec) -> LabeledStream:
    """Produce the named stream deterministically from its seed."""
    if spec.n < 1:
        raise MissingParam("n must be at least 1")
    params = _resolve_params(spec)
    rng = np.random.default_rng(spec.seed)
    t = _timestamps(spec, params, rng)
    builder = _BUILDERS[spec.name]
    x, y, change_points = builder(t, params, rng)
    return LabeledStream(
        x=x,
        t=t,
        y=y,
        change_points=tuple(change_points),
        continuous=spec.name in _CONTINUOUS,
        metadata={"name": spec.name, "params": params, "seed": spec.seed},
    )


def _gen_twister(t, params, rng):
    a, b, sigma = params["alpha"], params["beta"], params["sigma"]
    mean = a * t[:, None] * np.column_stack([np.sin(b * t), np.cos(b * t)])
    x = mean + rng.normal(0.0, sigma, size=mean.shape)
    return x, None, []


def _gen_spiral(t, params, rng):
    a, b, sigma = params["alpha"], params["beta"], params["sigma"]
    mean = a * np.column_stack([np.sin(b * t), np.cos(b * t)])
    x = mean + rng.normal(0.0, sigma, size=mean.shape)
    return x, None, []


def _gen_y(t, params, rng):
    a = params["alpha"]
    sign = rng.choice([-1.0, 1.0], size=t.size)
    first = sign * np.maximum(0.0, t - a)
    second = rng.uniform(0.0, 1.0, size=t.size)
    return np.column_stack([first, second]), None, [a]


def _gen_square(t, params, rng):
    a, b = params["alpha"], params["beta"]
    u = rng.uniform(0.0, 1.0, size=(t.size, 2))
    x = np.column_stack([a * t, b * t]) + u
    return x, None, []


def _segment_bounds(n: int, n_segments: int) -> list[int]:
    return [round(n * k / n_segments) for k in range(1, n_segments)]


def _gen_sea(t, params, rng):
    thresholds = list(params["thresholds"])
    x = rng.uniform(0.0, 10.0, size=(t.size, 3))
    bounds = _segment_bounds(t.size, len(thresholds))
    concept = np.searchsorted(bounds, np.arange(t.size), side="right")
    theta = np.array(thresholds)[concept]
    y = (x[:, 0] + x[:, 1] <= theta).astype(int)
    noise = params["label_noise"]
    if noise > 0:
        flips = rng.random(t.size) < noise
        y[flips] = 1 - y[flips]
    return x, y, [float(t[i]) for i in bounds]


def _gen_rplane(t, params, rng):
    angles = np.deg2rad(np.asarray(params["angles_deg"], dtype=float))
    x = rng.uniform(-1.0, 1.0, size=(t.size, 2))
    bounds = _segment_bounds(t.size, angles.size)
    concept = np.searchsorted(bounds, np.arange(t.size), side="right")
    normal = np.column_stack([np.cos(angles[concept]), np.sin(angles[concept])])
    y = (np.sum(x * normal, axis=1) >= 0).astype(int)
    noise = params["label_noise"]
    if noise > 0:
        flips = rng.random(t.size) < noise
        y[flips] = 1 - y[flips]
    return x, y, [float(t[i]) for i in bounds]


def _gen_fool_error(t, params, rng):
    """Two class-mixed clusters; one class slides along the class boundary.

    The slide starts at the midpoint and ramps linearly, is parallel to the
    boundary between the cluster centers, and therefore leaves the error
    rate of any boundary-aligned classifier unchanged.
    """
    n = t.size
    sep, sigma = params["sep"], params["sigma"]
    minority, shift = params["minority"], params["shift"]
    y = (rng.random(n) < 0.5).astype(int)
    own_cluster = rng.random(n) >= minority
    # cluster +1 is centered at (+sep, 0), cluster -1 at (-sep, 0)
    side = np.where(y == 1, 1.0, -1.0) * np.where(own_cluster, 1.0, -1.0)
    centers = np.column_stack([side * sep, np.zeros(n)])
    x = centers + rng.normal(0.0, sigma, size=(n, 2))
    onset = n // 2
    ramp = np.clip((np.arange(n) - onset) / max(1, n - onset), 0.0, None)
    x[:, 1] += np.where(y == 1, ramp * shift, 0.0)
    return x, y, [float(t[onset])]


def _gen_fool_marginal(t, params, rng):
    """Symmetric four-corner cross whose diagonals swap labels mid-stream.

    Feature-wise marginals, means and variances are identical before and
    after the swap; only the class-conditional laws change.
    """
    n = t.size
    arm, sigma = params["arm"], params["sigma"]
    corner = rng.integers(0, 4, size=n)
    signs = np.array([[1, 1], [-1, -1], [1, -1], [-1, 1]], dtype=float)
    x = signs[corner] * arm + rng.normal(0.0, sigma, size=(n, 2))
    diagonal = (corner >= 2).astype(int)  # 0: main diagonal, 1: anti-diagonal
    onset = n // 2
    swapped = np.arange(n) >= onset
    y = np.where(swapped, 1 - diagonal, diagonal)
    return x, y, [float(t[onset])]


_BUILDERS = {
    "twister": _gen_twister,
    "spiral": _gen_spiral,
    "y": _gen_y,
    "square": _gen_square,
    "sea": _gen_sea,
    "rplane": _gen_rplane,
    "fool_error": _gen_fool_error,
    "fool_marginal": _gen_fool_marginal,
}


def write_csv(stream: LabeledStream, path) -> None:
    """Write header ``t,f0,...,f{d-1}[,y]`` with round-trippable floats."""
    cols = ["t"] + [f"f{i}" for i in range(stream.n_features)]
    if stream.y is not None:
        cols.append("y")
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(stream)):
            row = [repr(float(stream.t[i]))]
            row += [repr(float(v)) for v in stream.x[i]]
            if stream.y is not None:
                row.append(str(int(stream.y[i])))
            fh.write(",".join(row) + "\n")


def write_truth(stream: LabeledStream, path) -> None:
    with open(path, "w") as fh:
        json.dump(
            {
                "change_points": list(stream.change_points),
                "continuous": stream.continuous,
            },
            fh,
        )


def read_truth(path) -> tuple[list[float], bool]:
    with open(path) as fh:
        obj = json.load(fh)
    return list(obj["change_points"]), bool(obj.get("continuous", False))


def ingest_csv(path, schema: dict | None = None) -> LabeledStream:
    """Load a stream from CSV.

    ``schema`` may name ``time_col``, ``feature_cols`` and ``label_col``;
    with no schema the ``t,f*,[y]`` convention of ``write_csv`` is assumed.
    Duplicate timestamps are tie-broken by row order with an epsilon bump,
    recorded under ``metadata['timestamp_bumps']``.
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    schema = schema or {}
    time_col = schema.get("time_col", "t")
    feature_cols = schema.get(
        "feature_cols", [h for h in header if h.startswith("f")]
    )
    label_col = schema.get("label_col", "y" if "y" in header else None)

    for col in [time_col, *feature_cols, *([label_col] if label_col else [])]:
        if col not in header:
            raise ParseError(f"{path}: column {col!r} not found in header")
    if not feature_cols:
        raise ParseError(f"{path}: no feature columns")

    t_idx = header.index(time_col)
    f_idx = [header.index(c) for c in feature_cols]
    y_idx = header.index(label_col) if label_col else None

    times, feats, labels = [], [], []
    for row_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"{path}:{row_no}: expected {len(header)} fields")
        try:
            times.append(float(parts[t_idx]))
            feats.append([float(parts[i]) for i in f_idx])
            if y_idx is not None:
                labels.append(int(float(parts[y_idx])))
        except ValueError as exc:
            raise ParseError(f"{path}:{row_no}: {exc}") from None

    t = np.array(times)
    if np.any(np.diff(t) < 0):
        line_no = int(np.flatnonzero(np.diff(t) < 0)[0]) + 3
        raise NonMonotoneTime(f"{path}:{line_no}: time column decreases")

    bumps = 0
    span = float(t[-1] - t[0]) if t.size > 1 else 1.0
    eps = max(span, 1.0) * 1e-12
    for i in range(1, t.size):
        if t[i] <= t[i - 1]:
            t[i] = t[i - 1] + eps
            bumps += 1

    return LabeledStream(
        x=np.array(feats),
        t=t,
        y=np.array(labels, dtype=int) if labels else None,
        change_points=(),
        continuous=False,
        metadata={"source": str(path), "timestamp_bumps": bumps},
    )
