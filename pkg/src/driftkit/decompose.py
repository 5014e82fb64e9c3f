"""Split an observed stream into a drifting and a non-drifting part.

Two routes: a linear one (run ICA on the samples with their timestamps
appended, keep only the time-dependent sources, invert) and a k-curve one
(fit k time-parameterized mean curves with k-means-style assignment and
take the per-sample curve value as the drifting part).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .stats import TooFewSamples, mutual_information
from .streams import LabeledStream, TimedSample


class ConvergenceError(RuntimeError):
    pass


class RankError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class EmptyCurveError(RuntimeError):
    pass


def _stream_arrays(stream) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(stream, LabeledStream):
        return stream.x, stream.t
    samples = list(stream)
    x = np.array([np.asarray(s.features, dtype=float).ravel() for s in samples])
    t = np.array([s.timestamp for s in samples], dtype=float)
    return x, t


@dataclass(frozen=True)
class IcaModel:
    """Linear mixing model: data rows satisfy x ~ mixing @ source row."""

    mixing: np.ndarray        # (d, n_sources)
    sources: np.ndarray       # (n, n_sources), includes the mean offset
    source_means: np.ndarray  # (n_sources,)
    unmixing: np.ndarray      # (n_sources, d)
    data_mean: np.ndarray     # (d,)
    n_iter: int

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Source values for new rows under the fitted model."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.unmixing.shape[1]:
            raise ShapeError("dimensionality differs from the fitted data")
        return x @ self.unmixing.T


def fastica_fit(x_with_time: np.ndarray, n_sources: int,
                seed: int = 0, tol: float = 1e-4,
                max_iter: int = 200) -> IcaModel:
    """Symmetric fixed-point ICA with the logcosh nonlinearity.

    Centers and whitens to ``n_sources`` principal directions, then iterates
    the tanh-based update with symmetric decorrelation until every component
    direction moves less than ``tol``.
    """
    x = np.asarray(x_with_time, dtype=float)
    if x.ndim != 2:
        raise ShapeError("input must be a 2-D sample matrix")
    n, d = x.shape
    if n_sources > d:
        raise ShapeError(f"n_sources={n_sources} exceeds dimensionality {d}")
    if n <= 10 * n_sources:
        raise TooFewSamples("need more than 10 samples per source")

    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / n
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval)[::-1][:n_sources]
    eigval, eigvec = eigval[order], eigvec[:, order]
    if eigval[0] <= 0 or eigval[-1] / eigval[0] < 1e-12:
        raise RankError("sample covariance is numerically singular")

    whiten = eigvec / np.sqrt(eigval)      # (d, r)
    z = xc @ whiten                        # unit covariance, (n, r)

    rng = np.random.default_rng(seed)
    w = _sym_decorrelate(rng.normal(size=(n_sources, n_sources)))
    for iteration in range(1, max_iter + 1):
        s = z @ w.T
        g = np.tanh(s)
        g_prime = (1.0 - g * g).mean(axis=0)
        w_new = _sym_decorrelate(g.T @ z / n - g_prime[:, None] * w)
        shift = float(np.max(np.abs(np.abs(np.sum(w_new * w, axis=1)) - 1.0)))
        w = w_new
        if shift < tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations (last shift {shift:.2e})"
        )

    unmixing = w @ whiten.T                # (r, d), sources = unmixing @ x
    mixing = np.linalg.pinv(unmixing)      # (d, r)
    sources = x @ unmixing.T               # raw sources, mean offset included
    return IcaModel(
        mixing=mixing,
        sources=sources,
        source_means=sources.mean(axis=0),
        unmixing=unmixing,
        data_mean=mean,
        n_iter=iteration,
    )


def _sym_decorrelate(w: np.ndarray) -> np.ndarray:
    val, vec = np.linalg.eigh(w @ w.T)
    val = np.maximum(val, 1e-18)
    return (vec / np.sqrt(val)) @ vec.T @ w


@dataclass(frozen=True)
class Decomposition:
    """Drifting part, non-drifting part, and the reconstruction residual."""

    x_d: np.ndarray
    x_i: np.ndarray
    residual: np.ndarray
    metadata: dict = field(default_factory=dict)


def linear_identities(a: np.ndarray, s_d: np.ndarray,
                      s_i: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drifting/non-drifting reconstructions from block source matrices.

    ``s_d`` and ``s_i`` occupy disjoint source coordinates (zeros
    elsewhere). Verifies that the two parts add up to the reconstruction
    plus its mean before returning them.
    """
    a = np.asarray(a, dtype=float)
    s_d = np.asarray(s_d, dtype=float)
    s_i = np.asarray(s_i, dtype=float)
    if s_d.shape != s_i.shape or a.ndim != 2 or s_d.shape[1] != a.shape[1]:
        raise ShapeError("incompatible mixing/source shapes")
    x_d = s_d @ a.T + (s_i @ a.T).mean(axis=0)
    x_i = s_i @ a.T + (s_d @ a.T).mean(axis=0)
    total = (s_d + s_i) @ a.T
    gap = np.max(np.abs(x_d + x_i - total - total.mean(axis=0)))
    if gap > 1e-10:
        raise ArithmeticError(f"decomposition identity violated by {gap:.2e}")
    return x_d, x_i


def linear_drifda(stream, n_sources: int | None = None,
                  i_min: float | str = "auto", seed: int = 0) -> Decomposition:
    """Linear decomposition: ICA on (features, time), keep drifting sources.

    Each independent source is scored by its mutual information with time;
    sources below the threshold (the mean source score when ``i_min`` is
    "auto") are frozen at their sample mean. The drifting part is the
    inversion of the frozen model with the appended time coordinate dropped.
    """
    x, t = _stream_arrays(stream)
    n, d = x.shape
    if n_sources is None:
        n_sources = d + 1
    if n < 20 * n_sources:
        raise TooFewSamples("stream too short for the requested source count")

    model = fastica_fit(np.column_stack([x, t]), n_sources, seed=seed)
    mi = np.array(
        [mutual_information(model.sources[:, i], t) for i in range(n_sources)]
    )
    threshold = float(np.mean(mi)) if i_min == "auto" else float(i_min)
    drifting = mi >= threshold

    means = np.tile(model.source_means, (n, 1))
    s_d = np.where(drifting, model.sources, means)
    s_i = np.where(drifting, means, model.sources)
    # split into block matrices on disjoint coordinates
    x_d_full, x_i_full = linear_identities(
        model.mixing, np.where(drifting, s_d, 0.0), np.where(drifting, 0.0, s_i)
    )
    x_d = x_d_full[:, :d]
    x_i = x_i_full[:, :d]
    return Decomposition(
        x_d=x_d,
        x_i=x_i,
        residual=x - x_d,
        metadata={
            "method": "linear",
            "mi": mi.tolist(),
            "threshold": threshold,
            "drifting_sources": np.flatnonzero(drifting).tolist(),
            "model": model,
        },
    )


@dataclass(frozen=True)
class RbfCurve:
    """Vector-valued mean curve over time: Gaussian bumps plus a bias."""

    centers: np.ndarray   # (p,)
    width: float
    weights: np.ndarray   # (p, d)
    bias: np.ndarray      # (d,)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float).ravel()
        phi = np.exp(
            -((t[:, None] - self.centers) ** 2) / (2.0 * self.width**2)
        )
        return phi @ self.weights + self.bias


@dataclass
class CurveModel:
    """k fitted mean curves plus the per-sample curve assignment."""

    k: int
    curves: list[RbfCurve]
    assignment: np.ndarray
    time_range: tuple[float, float]
    converged: bool
    objective_trace: list[list[float]] = field(default_factory=list)

    def predict(self, t: np.ndarray) -> np.ndarray:
        """Stacked curve values, shape (k, len(t), d)."""
        return np.stack([curve(t) for curve in self.curves])

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "time_range": list(self.time_range),
                "converged": self.converged,
                "curves": [
                    {
                        "centers": c.centers.tolist(),
                        "width": c.width,
                        "weights": c.weights.tolist(),
                        "bias": c.bias.tolist(),
                    }
                    for c in self.curves
                ],
                "assignment": self.assignment.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CurveModel":
        obj = json.loads(text)
        curves = [
            RbfCurve(
                centers=np.array(c["centers"]),
                width=float(c["width"]),
                weights=np.array(c["weights"]),
                bias=np.array(c["bias"]),
            )
            for c in obj["curves"]
        ]
        return cls(
            k=int(obj["k"]),
            curves=curves,
            assignment=np.array(obj["assignment"], dtype=int),
            time_range=tuple(obj["time_range"]),
            converged=bool(obj["converged"]),
        )


def _kmeans(x: np.ndarray, k: int, rng: np.random.Generator,
            max_iter: int = 100) -> np.ndarray:
    n = x.shape[0]
    centroids = x[rng.choice(n, size=k, replace=False)].copy()
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centroids[None]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        new = centroids.copy()
        for i in range(k):
            members = x[labels == i]
            if members.size:
                new[i] = members.mean(axis=0)
            else:
                new[i] = x[d2.min(axis=1).argmax()]
        if np.allclose(new, centroids):
            break
        centroids = new
    return centroids


def _fit_curve(curve: RbfCurve, t: np.ndarray, x: np.ndarray,
               ridge: float = 1e-6) -> RbfCurve:
    """Ridge least-squares refit of one curve on its assigned samples.

    Keeps the previous parameters when the refit does not reduce the
    squared error (can only happen through the ridge bias at convergence).
    """
    phi = np.exp(-((t[:, None] - curve.centers) ** 2) / (2.0 * curve.width**2))
    design = np.column_stack([phi, np.ones(t.size)])
    gram = design.T @ design + ridge * np.eye(design.shape[1])
    beta = np.linalg.solve(gram, design.T @ x)
    refit = RbfCurve(curve.centers, curve.width, beta[:-1], beta[-1])
    if np.sum((refit(t) - x) ** 2) > np.sum((curve(t) - x) ** 2):
        return curve
    return refit


def kcurve_fit(stream, k: int, n_chunks: int = 20,
               prototypes_per_curve: int = 10, seed: int = 0,
               max_rounds: int = 50) -> CurveModel:
    """Fit k time-parameterized mean curves by alternating assignment/refit.

    Curves start as constants at k-means centroids of the first chunk; the
    stream is then ingested chunk by chunk, each chunk alternating
    nearest-curve assignment with per-curve refits until the assignment
    stops changing. A curve that loses all samples is re-seeded at the
    worst-fit sample.
    """
    x, t = _stream_arrays(stream)
    n, d = x.shape
    if n < k * prototypes_per_curve * 3:
        raise TooFewSamples("stream too short for the requested curve budget")
    if k < 1:
        raise ValueError("k must be at least 1")

    rng = np.random.default_rng(seed)
    t_lo, t_hi = float(t.min()), float(t.max())
    p = prototypes_per_curve
    centers = np.linspace(t_lo, t_hi, p) if p > 1 else np.array([(t_lo + t_hi) / 2])
    width = (t_hi - t_lo) / (p - 1) if p > 1 else max(t_hi - t_lo, 1.0)
    if width <= 0:
        width = 1.0

    chunk_edges = np.linspace(0, n, n_chunks + 1).astype(int)
    first = max(chunk_edges[1], k)
    init_centroids = _kmeans(x[:first], k, rng)
    curves = [
        RbfCurve(centers, width, np.zeros((p, d)), init_centroids[i])
        for i in range(k)
    ]

    assignment = np.zeros(n, dtype=int)
    converged = True
    trace: list[list[float]] = []
    for c in range(n_chunks):
        hi = chunk_edges[c + 1]
        if hi == 0:
            continue
        xd, td = x[:hi], t[:hi]
        if xd.shape[0] < k:
            raise EmptyCurveError("fewer samples than curves in first chunk")
        prev = None
        chunk_trace: list[float] = []
        for _ in range(max_rounds):
            values = np.stack([curve(td) for curve in curves])  # (k, m, d)
            d2 = ((values - xd[None]) ** 2).sum(axis=2)
            labels = d2.argmin(axis=0)
            chunk_trace.append(float(d2[labels, np.arange(hi)].sum()))
            stolen: list[int] = []
            for i in range(k):
                if not np.any(labels == i):
                    fit_err = d2[labels, np.arange(hi)].copy()
                    fit_err[stolen] = -np.inf
                    worst = int(fit_err.argmax())
                    curves[i] = RbfCurve(centers, width, np.zeros((p, d)), xd[worst])
                    labels[worst] = i
                    stolen.append(worst)
            if prev is not None and np.array_equal(labels, prev):
                break
            for i in range(k):
                mask = labels == i
                curves[i] = _fit_curve(curves[i], td[mask], xd[mask])
            values = np.stack([curve(td) for curve in curves])
            d2 = ((values - xd[None]) ** 2).sum(axis=2)
            chunk_trace.append(float(d2[labels, np.arange(hi)].sum()))
            prev = labels
        else:
            converged = False
        assignment[:hi] = labels
        trace.append(chunk_trace)

    return CurveModel(
        k=k,
        curves=curves,
        assignment=assignment,
        time_range=(t_lo, t_hi),
        converged=converged,
        objective_trace=trace,
    )


def kcurve_transform(model: CurveModel, stream) -> Decomposition:
    """Drifting part = value of each sample's nearest curve at its time."""
    x, t = _stream_arrays(stream)
    values = model.predict(t)  # (k, n, d)
    if values.shape[2] != x.shape[1]:
        raise ShapeError("model dimensionality differs from the stream")
    d2 = ((values - x[None]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=0)
    x_d = values[labels, np.arange(x.shape[0])]
    residual = x - x_d
    return Decomposition(
        x_d=x_d,
        x_i=residual,
        residual=residual,
        metadata={"method": "kcurve", "assignment": labels},
    )


def decomposition_to_csv(stream, dec: Decomposition, path) -> None:
    """Write ``t, x_*, xd_*, resid_*`` rows for downstream plotting."""
    x, t = _stream_arrays(stream)
    d = x.shape[1]
    if dec.x_d.shape != x.shape:
        raise ShapeError("decomposition does not match the stream")
    header = (
        ["t"]
        + [f"x_{i}" for i in range(d)]
        + [f"xd_{i}" for i in range(d)]
        + [f"resid_{i}" for i in range(d)]
    )
    rows = np.column_stack([t, x, dec.x_d, dec.residual])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
