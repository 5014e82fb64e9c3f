"""Streaming drift detectors behind one update/status interface.

SWIDD keeps a single sliding window of (sample, timestamp) pairs and shrinks
it from the old end while an independence test between data and time
rejects. The baselines are ADWIN (adaptive windowing over a scalar such as
prediction errors), DDM (error-rate thresholds), HDDDM (batchwise Hellinger
distance over feature histograms) and K2ST (HDDDM windowing with the kernel
two-sample test).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import log, sqrt

import numpy as np

from .stats import hellinger, independence_rejects, mmd2_rejects
from .streams import TimedSample


class OutOfOrderTimestamp(ValueError):
    pass


@dataclass(frozen=True)
class DetectorStatus:
    kind: str  # "stable" | "warning" | "drift"
    timestamp: float | None = None

    @property
    def is_drift(self) -> bool:
        return self.kind == "drift"

    @property
    def is_warning(self) -> bool:
        return self.kind == "warning"


STABLE = DetectorStatus("stable")


def _drift(timestamp: float | None) -> DetectorStatus:
    return DetectorStatus("drift", timestamp)


class SWIDD:
    """Single-window drift detector via data/time independence testing.

    Appends each arriving sample with its timestamp; every ``stride``
    arrivals the window is tested for independence between samples and
    timestamps, and while the test rejects the oldest element is dropped
    and the shrunk window retested. A drift is reported whenever at least
    one element was dropped during an update.

    ``max_window`` bounds memory and test cost; the oldest element is
    silently discarded once the bound is hit. After a drift the next test
    waits until every sample that witnessed the event has left the window:
    without the pause, content that barely passed the shrink loop keeps
    re-triggering on later strides and a single borderline window can show
    up as a burst of alarms.
    """

    def __init__(self, p: float = 0.01, n_min: int = 50, stride: int = 10,
                 n_perm: int = 200, max_window: int = 300, seed: int = 0,
                 cooldown: bool = True):
        if not 0 < p < 1:
            raise ValueError("p must be in (0, 1)")
        if n_min < 8:
            raise ValueError("n_min must be at least 8")
        if stride < 1:
            raise ValueError("stride must be at least 1")
        self.p = p
        self.n_min = n_min
        self.stride = stride
        self.n_perm = n_perm
        self.max_window = max_window
        self.cooldown = cooldown
        self._rng = np.random.default_rng(seed)
        self._window: deque[tuple[np.ndarray, float]] = deque()
        self._arrivals = 0
        self._suspended_until = 0
        self.tests_run = 0

    @property
    def window_size(self) -> int:
        return len(self._window)

    def update(self, sample: TimedSample) -> DetectorStatus:
        if self._window and sample.timestamp < self._window[-1][1]:
            raise OutOfOrderTimestamp(
                f"timestamp {sample.timestamp} precedes window end"
            )
        features = np.asarray(sample.features, dtype=float).ravel()
        if sample.label is not None:
            features = np.append(features, float(sample.label))
        self._window.append((features, float(sample.timestamp)))
        if self.max_window and len(self._window) > self.max_window:
            self._window.popleft()
        self._arrivals += 1

        if self._arrivals % self.stride != 0 or self._arrivals < self._suspended_until:
            return STABLE

        if len(self._window) >= self.n_min:
            self.tests_run += 1  # one drift opportunity per tested stride
        dropped = False
        while len(self._window) >= self.n_min:
            x = np.array([f for f, _ in self._window])
            t = np.array([ts for _, ts in self._window])
            if not independence_rejects(x, t, self.p, self.n_perm, self._rng):
                break
            self._window.popleft()
            dropped = True
        if dropped and self.cooldown:
            turnover = self.max_window if self.max_window else len(self._window)
            self._suspended_until = self._arrivals + turnover
        return _drift(sample.timestamp) if dropped else STABLE


class _Bucket:
    __slots__ = ("n", "total", "total_sq")

    def __init__(self, n=0, total=0.0, total_sq=0.0):
        self.n = n
        self.total = total
        self.total_sq = total_sq

    def add(self, other: "_Bucket") -> "_Bucket":
        return _Bucket(self.n + other.n, self.total + other.total,
                       self.total_sq + other.total_sq)


class ADWIN:
    """Adaptive windowing over a scalar stream.

    The window is kept as an exponential histogram: levels of buckets whose
    element counts double per level, at most ``max_buckets`` buckets per
    level. On every update each bucket boundary is considered as a split of
    the window into old/new halves; when the absolute mean difference
    exceeds the delta-controlled bound, the old side is discarded and a
    drift reported.
    """

    def __init__(self, delta: float = 0.002, max_buckets: int = 5,
                 min_subwindow: int = 10):
        self.delta = delta
        self.max_buckets = max_buckets
        self.min_subwindow = min_subwindow
        self._levels: list[deque[_Bucket]] = [deque()]  # level i: buckets of 2^i
        self._n = 0
        self._total = 0.0
        self._total_sq = 0.0

    @property
    def window_size(self) -> int:
        return self._n

    @property
    def mean(self) -> float:
        return self._total / self._n if self._n else 0.0

    @property
    def variance(self) -> float:
        if self._n < 2:
            return 0.0
        return max(0.0, self._total_sq / self._n - self.mean**2)

    def update(self, value: float) -> DetectorStatus:
        if not np.isfinite(value):
            raise ValueError("value must be finite")
        value = float(value)
        self._levels[0].append(_Bucket(1, value, value * value))
        self._n += 1
        self._total += value
        self._total_sq += value * value
        self._compress()
        return _drift(None) if self._shrink() else STABLE

    def _compress(self):
        level = 0
        while level < len(self._levels):
            if len(self._levels[level]) <= self.max_buckets:
                break
            merged = self._levels[level].popleft().add(self._levels[level].popleft())
            if level + 1 == len(self._levels):
                self._levels.append(deque())
            self._levels[level + 1].append(merged)
            level += 1

    def _buckets_old_to_new(self):
        for level in reversed(range(len(self._levels))):
            yield from self._levels[level]

    def _shrink(self) -> bool:
        if self._n < 2 * self.min_subwindow:
            return False
        detected = False
        changed = True
        while changed and self._n >= 2 * self.min_subwindow:
            changed = False
            delta_prime = self.delta / max(log(self._n), 1.0)
            log_term = log(2.0 / delta_prime)
            variance = self.variance
            n0 = 0
            sum0 = 0.0
            for cut, bucket in enumerate(self._buckets_old_to_new()):
                n0 += bucket.n
                sum0 += bucket.total
                n1 = self._n - n0
                if n0 < self.min_subwindow:
                    continue
                if n1 < self.min_subwindow:
                    break
                m = 1.0 / (1.0 / n0 + 1.0 / n1)
                bound = sqrt(2.0 / m * variance * log_term) + 2.0 / (3.0 * m) * log_term
                if abs(sum0 / n0 - (self._total - sum0) / n1) > bound:
                    self._drop_oldest_buckets(cut + 1)
                    detected = True
                    changed = True
                    break
        return detected

    def _drop_oldest_buckets(self, count: int):
        for level in reversed(range(len(self._levels))):
            while count and self._levels[level]:
                bucket = self._levels[level].popleft()
                self._n -= bucket.n
                self._total -= bucket.total
                self._total_sq -= bucket.total_sq
                count -= 1
            if not count:
                break


class DDM:
    """Classification-error drift detector with warning/drift thresholds.

    Tracks the running error rate p and its binomial deviation s; keeps the
    minimum of p + s seen so far and compares the current p + s against
    p_min + 2 s_min (warning) and p_min + 3 s_min (drift). Statistics reset
    after each drift.
    """

    def __init__(self, warmup: int = 30):
        self.warmup = warmup
        self._reset()

    def _reset(self):
        self._n = 0
        self._errors = 0
        self._p_min = float("inf")
        self._s_min = float("inf")

    def update(self, error_indicator: int) -> DetectorStatus:
        if error_indicator not in (0, 1):
            raise ValueError("error indicator must be 0 or 1")
        self._n += 1
        self._errors += error_indicator
        if self._n < self.warmup:
            return STABLE
        p = self._errors / self._n
        s = sqrt(p * (1.0 - p) / self._n)
        if p + s < self._p_min + self._s_min:
            self._p_min, self._s_min = p, s
        level = p + s
        if level >= self._p_min + 3.0 * self._s_min:
            self._reset()
            return _drift(None)
        if level >= self._p_min + 2.0 * self._s_min:
            return DetectorStatus("warning")
        return STABLE


class _BatchedDetector:
    """Shared batching for the reference/current-batch detectors."""

    def __init__(self, batch_size: int):
        if batch_size < 4:
            raise ValueError("batch_size must be at least 4")
        self.batch_size = batch_size
        self._batch: list[np.ndarray] = []

    @staticmethod
    def _features(sample: TimedSample) -> np.ndarray:
        features = np.asarray(sample.features, dtype=float).ravel()
        if sample.label is not None:
            features = np.append(features, float(sample.label))
        return features

    def update(self, sample: TimedSample) -> DetectorStatus:
        self._batch.append(self._features(sample))
        if len(self._batch) < self.batch_size:
            return STABLE
        batch = np.array(self._batch)
        self._batch = []
        return (
            _drift(sample.timestamp) if self._process_batch(batch) else STABLE
        )

    def _process_batch(self, batch: np.ndarray) -> bool:
        raise NotImplementedError


class HDDDM(_BatchedDetector):
    """Hellinger-distance drift detector over per-feature histograms.

    Keeps a growing reference sample; on every full batch the averaged
    per-feature Hellinger distance to the reference is computed, and drift
    is flagged when the distance jump exceeds the running mean plus
    ``gamma`` standard deviations of past jumps. The reference restarts from
    the triggering batch after a drift.
    """

    def __init__(self, batch_size: int = 50, gamma: float = 1.0):
        super().__init__(batch_size)
        self.gamma = gamma
        self.n_bins = int(np.ceil(np.sqrt(batch_size)))
        self._reference: np.ndarray | None = None
        self._prev_distance: float | None = None
        self._jumps: list[float] = []

    def _distance(self, reference: np.ndarray, batch: np.ndarray) -> float:
        dists = []
        for j in range(reference.shape[1]):
            lo = min(reference[:, j].min(), batch[:, j].min())
            hi = max(reference[:, j].max(), batch[:, j].max())
            if hi <= lo:
                hi = lo + 1.0
            edges = np.linspace(lo, hi, self.n_bins + 1)
            h_ref, _ = np.histogram(reference[:, j], bins=edges)
            h_new, _ = np.histogram(batch[:, j], bins=edges)
            dists.append(
                hellinger(h_ref / h_ref.sum(), h_new / h_new.sum())
            )
        return float(np.mean(dists))

    def _process_batch(self, batch: np.ndarray) -> bool:
        if self._reference is None:
            self._reference = batch
            return False
        distance = self._distance(self._reference, batch)
        drift = False
        if self._prev_distance is not None:
            jump = abs(distance - self._prev_distance)
            if len(self._jumps) >= 2:
                threshold = np.mean(self._jumps) + self.gamma * np.std(self._jumps)
                drift = jump > threshold
            self._jumps.append(jump)
        if drift:
            self._reference = batch
            self._prev_distance = None
            self._jumps = []
        else:
            self._reference = np.vstack([self._reference, batch])
            self._prev_distance = distance
        return drift


class K2ST(_BatchedDetector):
    """HDDDM-style windowing with the kernel two-sample test.

    Each full batch is tested against the reference sample with a
    permutation MMD^2 test; drift is flagged when the p-value falls below
    ``alpha``. The reference grows on quiet batches (capped at
    ``max_reference`` most recent rows) and restarts after a drift.
    """

    def __init__(self, batch_size: int = 50, alpha: float = 0.01,
                 n_perm: int = 200, max_reference: int = 500, seed: int = 0):
        super().__init__(batch_size)
        self.alpha = alpha
        self.n_perm = n_perm
        self.max_reference = max_reference
        self._rng = np.random.default_rng(seed)
        self._reference: np.ndarray | None = None

    def _process_batch(self, batch: np.ndarray) -> bool:
        if self._reference is None:
            self._reference = batch
            return False
        drift = mmd2_rejects(self._reference, batch, self.alpha, self.n_perm,
                             self._rng)
        if drift:
            self._reference = batch
        else:
            self._reference = np.vstack([self._reference, batch])[
                -self.max_reference:
            ]
        return drift


class FrozenLinearClassifier:
    """Least-squares linear classifier fit once and never retrained.

    Provides the 0/1 error stream that the supervised baselines consume.
    """

    def __init__(self):
        self._w = None

    def fit(self, x: np.ndarray, y: np.ndarray) -> "FrozenLinearClassifier":
        x = np.asarray(x, dtype=float)
        design = np.column_stack([x, np.ones(x.shape[0])])
        targets = np.where(np.asarray(y) > 0, 1.0, -1.0)
        self._w, *_ = np.linalg.lstsq(design, targets, rcond=None)
        return self

    def predict(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        scores = np.column_stack([x, np.ones(x.shape[0])]) @ self._w
        return (scores >= 0).astype(int)

    def error(self, x, y) -> int:
        return int(self.predict(x)[0] != int(y))
