"""Exact decision procedures for drift on finite time and data spaces.

A process is a row-stochastic kernel matrix (one distribution over the data
space per time point) together with a distribution over the time points.
All notions of drift reduce to finite linear algebra here, so every
predicate below is decidable exactly (up to a fixed numerical tolerance)
and the equivalences between them can be verified by brute force.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ATOL = 1e-12


class NullSetError(ValueError):
    """Raised when a time-window model is requested over a zero-mass set."""


@dataclass(frozen=True)
class FiniteDriftProcess:
    """Row-stochastic kernel (|T| x |X|) plus a time distribution (|T|)."""

    kernel: np.ndarray
    time_dist: np.ndarray

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        time_dist = np.asarray(self.time_dist, dtype=float)
        if kernel.ndim != 2:
            raise ValueError("kernel must be a 2-D matrix")
        if time_dist.ndim != 1 or time_dist.shape[0] != kernel.shape[0]:
            raise ValueError("time_dist length must match kernel row count")
        if np.any(kernel < -ATOL) or np.any(kernel > 1 + ATOL):
            raise ValueError("kernel entries must lie in [0, 1]")
        if not np.allclose(kernel.sum(axis=1), 1.0, atol=ATOL, rtol=0):
            raise ValueError("every kernel row must sum to 1")
        if np.any(time_dist < -ATOL):
            raise ValueError("time_dist entries must be non-negative")
        if abs(time_dist.sum() - 1.0) > ATOL:
            raise ValueError("time_dist must sum to 1")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "time_dist", time_dist)

    @property
    def n_times(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_points(self) -> int:
        return self.kernel.shape[1]

    def support(self) -> np.ndarray:
        """Indices of time points with positive mass."""
        return np.flatnonzero(self.time_dist > 0)

    def to_json(self) -> str:
        return json.dumps(
            {"P_T": self.time_dist.tolist(), "kernel": self.kernel.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "FiniteDriftProcess":
        obj = json.loads(text)
        return cls(kernel=np.array(obj["kernel"]), time_dist=np.array(obj["P_T"]))


@dataclass(frozen=True)
class JointDistribution:
    """Joint law over time x data, entries non-negative and summing to 1."""

    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if np.any(table < -ATOL):
            raise ValueError("joint entries must be non-negative")
        if abs(table.sum() - 1.0) > ATOL:
            raise ValueError("joint table must sum to 1")
        object.__setattr__(self, "table", table)

    def time_marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def data_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)


@dataclass(frozen=True)
class TimeSubset:
    """A set of time indices with its derived mass."""

    members: frozenset[int]
    mass: float = field(default=0.0)

    @classmethod
    def of(cls, members, proc: FiniteDriftProcess) -> "TimeSubset":
        members = frozenset(int(m) for m in members)
        if members and (min(members) < 0 or max(members) >= proc.n_times):
            raise ValueError("subset members out of range")
        mass = float(proc.time_dist[sorted(members)].sum()) if members else 0.0
        return cls(members=members, mass=mass)

    def complement(self, proc: FiniteDriftProcess) -> "TimeSubset":
        return TimeSubset.of(set(range(proc.n_times)) - self.members, proc)


def joint_of(proc: FiniteDriftProcess) -> JointDistribution:
    """Joint law induced by the process: table[t, x] = P_T(t) * kernel[t, x]."""
    return JointDistribution(table=proc.time_dist[:, None] * proc.kernel)


def has_drift(proc: FiniteDriftProcess) -> bool:
    """True iff two positive-mass time points carry different distributions.

    Differences on zero-mass time points are ignored: they can never be
    observed, so they are irrelevant in the almost-sure sense.
    """
    rows = proc.kernel[proc.support()]
    if rows.shape[0] < 2:
        return False
    return bool(np.max(np.abs(rows - rows[0])) > ATOL)


def constant_part(proc: FiniteDriftProcess) -> np.ndarray | None:
    """Mixture distribution over the data space iff the process is constant.

    The candidate is the time-average of the kernel; the process is constant
    exactly when every positive-mass row equals it, and the average then
    also coincides with some observed row.
    """
    p_x = proc.time_dist @ proc.kernel
    rows = proc.kernel[proc.support()]
    if rows.shape[0] and np.max(np.abs(rows - p_x)) > ATOL:
        return None
    return p_x


def model_over(proc: FiniteDriftProcess, a: TimeSubset) -> np.ndarray:
    """Optimal static model over the window: mass-weighted mixture of rows."""
    if a.mass <= 0:
        raise NullSetError("window has zero time mass")
    idx = sorted(a.members)
    w = proc.time_dist[idx]
    return (w @ proc.kernel[idx]) / w.sum()


def has_proper_drift(proc: FiniteDriftProcess) -> bool:
    """True iff the joint law is not the product of its own marginals."""
    joint = joint_of(proc)
    product = np.outer(joint.time_marginal(), joint.data_marginal())
    return bool(np.max(np.abs(joint.table - product)) > ATOL)


def has_dependency_drift(proc: FiniteDriftProcess) -> bool:
    """True iff data and time are statistically dependent under the joint law.

    Decided through the mutual information of the joint table, which is zero
    exactly at independence. This is a deliberately different route from
    ``has_proper_drift`` so the two can cross-check each other.
    """
    joint = joint_of(proc).table
    r = joint.sum(axis=1)
    c = joint.sum(axis=0)
    mask = joint > 0
    prod = np.outer(r, c)
    mi = float(np.sum(joint[mask] * np.log(joint[mask] / prod[mask])))
    return mi > ATOL


def _nonempty_proper_subsets(n: int):
    for bits in range(1, (1 << n) - 1):
        yield [i for i in range(n) if bits >> i & 1]


def find_alternating_pair(
    proc: FiniteDriftProcess,
) -> tuple[TimeSubset, TimeSubset] | None:
    """Complementary positive-mass windows with different models, if any.

    Exhaustive search over subsets; exponential in |T|, which is fine at the
    verifier scale (|T| <= 12).
    """
    if proc.n_times > 12:
        raise ValueError("subset search is capped at 12 time points")
    for members in _nonempty_proper_subsets(proc.n_times):
        a = TimeSubset.of(members, proc)
        b = a.complement(proc)
        if a.mass <= 0 or b.mass <= 0:
            continue
        if np.max(np.abs(model_over(proc, a) - model_over(proc, b))) > ATOL:
            return a, b
    return None


def change_point(proc: FiniteDriftProcess) -> int | None:
    """Threshold index splitting time into two windows with different models.

    Among all thresholds where both halves carry mass and their models
    differ, returns the one with the largest model gap (ties broken toward
    the earliest threshold); None when no threshold separates the process.
    """
    best_t0 = None
    best_gap = ATOL
    for t0 in range(1, proc.n_times):
        left = TimeSubset.of(range(t0), proc)
        right = TimeSubset.of(range(t0, proc.n_times), proc)
        if left.mass <= 0 or right.mass <= 0:
            continue
        gap = float(
            np.max(np.abs(model_over(proc, left) - model_over(proc, right)))
        )
        if gap > best_gap:
            best_gap = gap
            best_t0 = t0
    return best_t0


def random_process(
    rng: np.random.Generator, max_times: int = 6, max_points: int = 6
) -> FiniteDriftProcess:
    """Random instance for the randomized equivalence suite.

    Mixes four families so both branches of every predicate get exercised:
    fully random kernels, kernels with a zero-mass time point, constant
    kernels (optionally perturbed on a zero-mass row only), and kernels
    built from few distinct rows.
    """
    nt = int(rng.integers(2, max_times + 1))
    nx = int(rng.integers(2, max_points + 1))
    kernel = rng.dirichlet(np.ones(nx), size=nt)
    time_dist = rng.dirichlet(np.ones(nt))

    variant = rng.random()
    if variant < 0.30:
        pass  # fully random
    elif variant < 0.60:
        dead = int(rng.integers(nt))
        time_dist[dead] = 0.0
        time_dist /= time_dist.sum()
    elif variant < 0.80:
        kernel = np.tile(kernel[0], (nt, 1))
        if rng.random() < 0.5:
            dead = int(rng.integers(nt))
            time_dist[dead] = 0.0
            time_dist /= time_dist.sum()
            kernel[dead] = rng.dirichlet(np.ones(nx))
    else:
        n_proto = int(rng.integers(1, 3))
        protos = rng.dirichlet(np.ones(nx), size=n_proto)
        kernel = protos[rng.integers(n_proto, size=nt)]
        if rng.random() < 0.5:
            dead = int(rng.integers(nt))
            time_dist[dead] = 0.0
            time_dist /= time_dist.sum()
    return FiniteDriftProcess(kernel=kernel, time_dist=time_dist)


def verify_equivalences(n_instances: int, seed: int, max_times: int = 6,
                        max_points: int = 6) -> dict[str, tuple[int, int]]:
    """Brute-force check of the drift equivalence diagram on random instances.

    Returns a mapping from property name to (violations, instances checked).
    Checked per instance:

    * no drift  <=>  the process is constant
    * proper drift <=> joint law is dependent <=> an alternating complementary
      pair exists <=> a separating threshold exists
    * proper drift implies drift
    * with full time support, drift and proper drift coincide
    * merging two disjoint windows matches the mass-weighted model mixture
    """
    rng = np.random.default_rng(seed)
    names = [
        "drift_iff_changing",
        "proper_iff_dependency",
        "proper_iff_alternating",
        "proper_iff_change_point",
        "proper_implies_drift",
        "full_support_drift_iff_proper",
        "window_merge_consistency",
    ]
    violations = {name: 0 for name in names}
    checked = {name: 0 for name in names}

    for _ in range(n_instances):
        proc = random_process(rng, max_times, max_points)
        drift = has_drift(proc)
        proper = has_proper_drift(proc)

        checked["drift_iff_changing"] += 1
        if drift != (constant_part(proc) is None):
            violations["drift_iff_changing"] += 1

        checked["proper_iff_dependency"] += 1
        if proper != has_dependency_drift(proc):
            violations["proper_iff_dependency"] += 1

        checked["proper_iff_alternating"] += 1
        if proper != (find_alternating_pair(proc) is not None):
            violations["proper_iff_alternating"] += 1

        checked["proper_iff_change_point"] += 1
        if proper != (change_point(proc) is not None):
            violations["proper_iff_change_point"] += 1

        checked["proper_implies_drift"] += 1
        if proper and not drift:
            violations["proper_implies_drift"] += 1

        if np.all(proc.time_dist > 0):
            checked["full_support_drift_iff_proper"] += 1
            if drift != proper:
                violations["full_support_drift_iff_proper"] += 1

        checked["window_merge_consistency"] += 1
        if _window_merge_violated(proc, rng):
            violations["window_merge_consistency"] += 1

    return {name: (violations[name], checked[name]) for name in names}


def _window_merge_violated(proc: FiniteDriftProcess, rng: np.random.Generator) -> bool:
    support = proc.support()
    if support.size < 2:
        return False
    split = rng.permutation(support)
    a = TimeSubset.of(split[: support.size // 2 or 1], proc)
    b = TimeSubset.of(split[support.size // 2 or 1:], proc)
    if a.mass <= 0 or b.mass <= 0:
        return False
    merged = TimeSubset.of(a.members | b.members, proc)
    direct = model_over(proc, merged)
    mixed = (a.mass * model_over(proc, a) + b.mass * model_over(proc, b)) / (
        a.mass + b.mass
    )
    return bool(np.max(np.abs(direct - mixed)) > ATOL)
