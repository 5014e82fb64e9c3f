"""Kernel and information statistics shared by detectors and decomposition.

HSIC with permutation p-values, the kernel two-sample test (MMD^2),
Hellinger distance, a bias-corrected histogram mutual-information estimate,
and a k-nearest-neighbour time-dependency score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform


class BandwidthError(ValueError):
    pass


class TooFewSamples(ValueError):
    pass


class PermutationCountError(ValueError):
    pass


class BinMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_permutations: int


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    return x


def _sq_dists(x: np.ndarray) -> np.ndarray:
    return squareform(pdist(x, "sqeuclidean"), checks=False)


def median_bandwidth(x) -> float:
    """Median pairwise Euclidean distance; 1.0 when all points coincide."""
    x = _as_matrix(x)
    if x.shape[0] < 2:
        return 1.0
    d = pdist(x, "euclidean")
    med = float(np.median(d))
    return med if med > 0 else 1.0


def rbf_gram(x, bandwidth: float) -> np.ndarray:
    """Gaussian kernel matrix exp(-||xi - xj||^2 / (2 bandwidth^2))."""
    if bandwidth <= 0:
        raise BandwidthError(f"bandwidth must be positive, got {bandwidth}")
    x = _as_matrix(x)
    return np.exp(_sq_dists(x) / (-2.0 * bandwidth * bandwidth))


def _center(gram: np.ndarray) -> np.ndarray:
    # H G H without materializing H
    gc = gram - gram.mean(axis=0, keepdims=True)
    gc -= gc.mean(axis=1, keepdims=True)
    return gc


def _normalize_time(t: np.ndarray) -> np.ndarray:
    # Min-max to [0, 1] so absolute stream position cannot hurt conditioning.
    span = t.max() - t.min()
    if span <= 0:
        return np.zeros_like(t)
    return (t - t.min()) / span


def _hsic_grams(x, t) -> tuple[np.ndarray, np.ndarray]:
    x = _as_matrix(x)
    t = _normalize_time(_as_matrix(t))
    if x.shape[0] != t.shape[0]:
        raise ValueError("x and t must have the same number of samples")
    k = rbf_gram(x, median_bandwidth(x))
    l = rbf_gram(t, median_bandwidth(t))
    return k, l


def hsic_from_grams(k: np.ndarray, l: np.ndarray) -> float:
    """Biased HSIC estimate (1/n^2) trace(K H L H) from precomputed grams."""
    n = k.shape[0]
    return float(np.sum(_center(k) * l) / (n * n))


def hsic(x, t) -> float:
    """Biased HSIC between samples and their timestamps.

    RBF kernels with per-call median-heuristic bandwidths; timestamps are
    min-max normalized first. Zero (up to float noise) iff the empirical
    dependence vanishes.
    """
    x = _as_matrix(x)
    if x.shape[0] < 4:
        raise TooFewSamples("hsic needs at least 4 samples")
    k, l = _hsic_grams(x, t)
    return hsic_from_grams(k, l)


def _permutation_batch(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    return rng.permuted(np.tile(np.arange(n), (count, 1)), axis=1)


def _hsic_exceedances(kc: np.ndarray, lc: np.ndarray, observed: float,
                      n_perm: int, rng: np.random.Generator,
                      stop_after: int | None = None) -> int:
    """Count permuted statistics >= observed, optionally stopping early.

    Permutations are drawn and evaluated in growing chunks so the double
    gather and the contraction run vectorized while a quick early stop
    (the common case on stationary data) only pays for a few permutations.
    """
    n = kc.shape[0]
    exceed = 0
    done = 0
    chunk = 8 if stop_after is not None else 64
    while done < n_perm:
        b = min(chunk, n_perm - done)
        perms = _permutation_batch(rng, b, n)
        lp = lc[perms[:, :, None], perms[:, None, :]]
        stats = np.einsum("ij,bij->b", kc, lp)
        exceed += int(np.sum(stats >= observed))
        done += b
        if stop_after is not None and exceed > stop_after:
            return exceed
        chunk = min(chunk * 2, 64)
    return exceed


def hsic_test(x, t, n_perm: int = 200, seed: int | None = None) -> TestResult:
    """Permutation independence test between samples and timestamps.

    p = (1 + #{permutations with statistic >= observed}) / (1 + n_perm),
    permutations drawn from a generator seeded with ``seed``.
    """
    x = _as_matrix(x)
    if x.shape[0] < 8:
        raise TooFewSamples("hsic_test needs at least 8 samples")
    if n_perm < 50:
        raise PermutationCountError("n_perm must be at least 50")
    k, l = _hsic_grams(x, t)
    n = k.shape[0]
    kc, lc = _center(k), _center(l)
    observed = float(np.sum(kc * lc))
    rng = np.random.default_rng(seed)
    exceed = _hsic_exceedances(kc, lc, observed, n_perm, rng)
    return TestResult(observed / (n * n), (1 + exceed) / (1 + n_perm), n_perm)


def _max_exceedances(alpha: float, n_perm: int) -> int:
    """Largest exceedance count that still rejects at level alpha.

    Matches the (1 + exceed) / (1 + n_perm) < alpha comparison bit for bit,
    so early-stopped decisions agree with the full permutation test.
    """
    max_exceed = -1
    while (2 + max_exceed) / (1 + n_perm) < alpha:
        max_exceed += 1
    return max_exceed


def independence_rejects(x, t, alpha: float, n_perm: int,
                         rng: np.random.Generator) -> bool:
    """Same reject/accept decision as ``hsic_test`` with early stopping.

    Stops drawing permutations as soon as enough exceedances have
    accumulated that the p-value can no longer fall below ``alpha``; on
    stationary data this typically takes a single chunk of permutations.
    """
    x = _as_matrix(x)
    if x.shape[0] < 8:
        raise TooFewSamples("independence test needs at least 8 samples")
    k, l = _hsic_grams(x, t)
    kc, lc = _center(k), _center(l)
    observed = float(np.sum(kc * lc))
    max_exceed = _max_exceedances(alpha, n_perm)
    if max_exceed < 0:
        return False
    exceed = _hsic_exceedances(kc, lc, observed, n_perm, rng,
                               stop_after=max_exceed)
    return exceed <= max_exceed


def _mmd2_stats(gram: np.ndarray, membership: np.ndarray, m: int) -> np.ndarray:
    """Biased MMD^2 for a batch of 0/1 first-group membership vectors.

    Uses sum(K_xy) = (sum(K) - sum(K_xx) - sum(K_yy)) / 2, so only the two
    block sums are needed per relabeling and the batch reduces to one
    matrix product.
    """
    n_y = gram.shape[0] - m
    total = float(gram.sum())
    gv = membership @ gram
    pxx = np.sum(gv * membership, axis=1)
    pyy = total - 2.0 * gv.sum(axis=1) + pxx
    pxy = (total - pxx - pyy) / 2.0
    return pxx / (m * m) + pyy / (n_y * n_y) - 2.0 * pxy / (m * n_y)


def _mmd2_exceedances(gram: np.ndarray, m: int, observed: float, n_perm: int,
                      rng: np.random.Generator, stop_after: int | None = None,
                      chunk: int = 64) -> int:
    n_all = gram.shape[0]
    exceed = 0
    done = 0
    while done < n_perm:
        b = min(chunk, n_perm - done)
        perms = _permutation_batch(rng, b, n_all)
        membership = np.zeros((b, n_all))
        np.put_along_axis(membership, perms[:, :m], 1.0, axis=1)
        stats = _mmd2_stats(gram, membership, m)
        exceed += int(np.sum(stats >= observed))
        done += b
        if stop_after is not None and exceed > stop_after:
            return exceed
    return exceed


def mmd2_test(x, y, n_perm: int = 200, seed: int | None = None) -> TestResult:
    """Kernel two-sample test: biased MMD^2 with a pooled-relabeling null.

    A single RBF kernel with the median-heuristic bandwidth of the pooled
    sample is shared by both groups.
    """
    x, y = _as_matrix(x), _as_matrix(y)
    if x.shape[0] < 4 or y.shape[0] < 4:
        raise TooFewSamples("mmd2_test needs at least 4 samples per side")
    pooled = np.vstack([x, y])
    gram = rbf_gram(pooled, median_bandwidth(pooled))
    m = x.shape[0]
    observed = float(
        _mmd2_stats(gram, np.r_[np.ones(m), np.zeros(y.shape[0])][None], m)[0]
    )
    rng = np.random.default_rng(seed)
    exceed = _mmd2_exceedances(gram, m, observed, n_perm, rng)
    return TestResult(observed, (1 + exceed) / (1 + n_perm), n_perm)


def mmd2_rejects(x, y, alpha: float, n_perm: int, rng: np.random.Generator) -> bool:
    """Early-stopping variant of ``mmd2_test`` returning only the decision."""
    x, y = _as_matrix(x), _as_matrix(y)
    if x.shape[0] < 4 or y.shape[0] < 4:
        raise TooFewSamples("mmd2 test needs at least 4 samples per side")
    pooled = np.vstack([x, y])
    gram = rbf_gram(pooled, median_bandwidth(pooled))
    m = x.shape[0]
    observed = float(
        _mmd2_stats(gram, np.r_[np.ones(m), np.zeros(y.shape[0])][None], m)[0]
    )
    max_exceed = _max_exceedances(alpha, n_perm)
    if max_exceed < 0:
        return False
    exceed = _mmd2_exceedances(gram, m, observed, n_perm, rng,
                               stop_after=max_exceed)
    return exceed <= max_exceed


def hellinger(h1, h2) -> float:
    """Hellinger distance between two normalized histograms, in [0, 1]."""
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    if h1.shape != h2.shape:
        raise BinMismatch(f"bin counts differ: {h1.shape} vs {h2.shape}")
    return float(np.sqrt(0.5 * np.sum((np.sqrt(h1) - np.sqrt(h2)) ** 2)))


def mutual_information(s, t) -> float:
    """Histogram mutual information (nats) between a scalar series and time.

    Equal-width 2-D histogram with ceil(n^(1/3)) bins per axis and a
    Miller-Madow bias correction, clipped at zero. Finer grids (e.g. sqrt(n)
    bins per axis) leave several tenths of a nat of bias on independent
    data even after correction, which would drown the relevance ranking
    this estimate feeds.
    """
    s = np.asarray(s, dtype=float).ravel()
    t = np.asarray(t, dtype=float).ravel()
    n = s.size
    if n < 20:
        raise TooFewSamples("mutual_information needs at least 20 samples")
    if t.size != n:
        raise ValueError("series and time must have equal length")
    bins = int(np.ceil(np.cbrt(n)))
    counts, _, _ = np.histogram2d(s, t, bins=bins)
    joint = counts / n
    ps = joint.sum(axis=1)
    pt = joint.sum(axis=0)
    mask = joint > 0
    mi = float(np.sum(joint[mask] * np.log(joint[mask] / np.outer(ps, pt)[mask])))
    correction = (np.count_nonzero(joint) - np.count_nonzero(ps)
                  - np.count_nonzero(pt) + 1) / (2.0 * n)
    return max(0.0, mi - correction)


def time_dependency_score(x, t, k: int = 5) -> float:
    """How well time can be predicted from the features, in [0, 1].

    Leave-one-out k-nearest-neighbour regression of t on x; the score is the
    clipped coefficient of determination max(0, 1 - MSE / Var(t)). Zero when
    the features say nothing about time, one for a perfect predictor.
    """
    x = _as_matrix(x)
    t = np.asarray(t, dtype=float).ravel()
    n = x.shape[0]
    if not 1 <= k < n:
        raise TooFewSamples(f"need n > k >= 1, got n={n}, k={k}")
    var_t = float(np.var(t))
    if var_t == 0:
        return 0.0
    d2 = _sq_dists(x)
    np.fill_diagonal(d2, np.inf)
    neighbors = np.argpartition(d2, k - 1, axis=1)[:, :k]
    pred = t[neighbors].mean(axis=1)
    mse = float(np.mean((pred - t) ** 2))
    return max(0.0, 1.0 - mse / var_t)
