"""Row/column dissimilarities, threshold neighbor sets, and the 2x2 split.

The unit dissimilarity between rows i and j is the mean squared difference
of their outcomes over the candidate columns where both are observed; the
time dissimilarity mirrors it over rows.  Pairs with zero overlap get +inf
and can never become neighbors.  Thresholding is inclusive (rho <= eta).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .panel import ObservationPanel, TargetCell
from .seeding import rng_for


@dataclass(frozen=True)
class SplitAssignment:
    """2x2 split: distance data vs. candidate pools, rows and columns.

    ``unit_half_1`` holds the candidate units for unit neighbors, with their
    distances computed over columns ``time_half_1``; ``time_half_2`` holds
    the candidate times, with distances computed over rows ``unit_half_2``.
    All four sets exclude the target row/column.
    """

    time_half_1: np.ndarray
    time_half_2: np.ndarray
    unit_half_1: np.ndarray
    unit_half_2: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("time_half_1", "time_half_2", "unit_half_1", "unit_half_2"):
            arr = np.asarray(getattr(self, name), dtype=np.intp)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def make_split(
    n_units: int,
    n_times: int,
    target: TargetCell,
    seed: int,
    mode: str = "bernoulli_half",
) -> SplitAssignment:
    """Randomly partition the non-target rows and columns into two halves.

    ``bernoulli_half`` assigns each index independently with probability 1/2;
    ``exact_half`` draws a uniformly random balanced partition (sizes differ
    by at most one).  Deterministic given ``seed``.
    """
    if mode not in ("bernoulli_half", "exact_half"):
        raise InvalidArgument(f"unknown split mode {mode!r}")
    rng = rng_for(seed, "split", target.unit, target.time)
    units = np.array([j for j in range(n_units) if j != target.unit], dtype=np.intp)
    times = np.array([t for t in range(n_times) if t != target.time], dtype=np.intp)

    def _partition(idx: np.ndarray):
        if mode == "bernoulli_half":
            pick = rng.random(idx.size) < 0.5
            return idx[pick], idx[~pick]
        perm = rng.permutation(idx)
        cut = idx.size // 2 + (rng.integers(0, 2) if idx.size % 2 else 0)
        return np.sort(perm[:cut]), np.sort(perm[cut:])

    u1, u2 = _partition(units)
    t1, t2 = _partition(times)
    return SplitAssignment(
        time_half_1=np.sort(t1),
        time_half_2=np.sort(t2),
        unit_half_1=np.sort(u1),
        unit_half_2=np.sort(u2),
        seed=seed,
    )


@dataclass(frozen=True)
class NeighborSets:
    """Selected unit/time neighbors for one target cell."""

    target: TargetCell
    unit_neighbors: np.ndarray
    time_neighbors: np.ndarray
    eta1: float
    eta2: float
    split: SplitAssignment | None = None
    unit_distances: dict = field(default_factory=dict)
    time_distances: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("unit_neighbors", "time_neighbors"):
            arr = np.asarray(getattr(self, name), dtype=np.intp)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def to_json_dict(self) -> dict:
        def _num(x):
            return None if np.isinf(x) else float(x)

        return {
            "target": {"unit": self.target.unit, "time": self.target.time},
            "eta1": self.eta1,
            "eta2": self.eta2,
            "unit_neighbors": [int(j) for j in self.unit_neighbors],
            "time_neighbors": [int(t) for t in self.time_neighbors],
            "unit_distances": {int(j): _num(d) for j, d in self.unit_distances.items()},
            "time_distances": {int(t): _num(d) for t, d in self.time_distances.items()},
        }


def _pair_distance(values, mask, a, b, cols):
    """Masked mean squared difference between rows a and b over ``cols``."""
    w = mask[a, cols] * mask[b, cols]
    overlap = int(w.sum())
    if overlap == 0:
        return np.inf
    diff = values[a, cols] - values[b, cols]
    return float(np.sum(w * diff * diff) / overlap)


def unit_distance(
    panel: ObservationPanel,
    i: int,
    j: int,
    exclude_time: int,
    candidate_times=None,
) -> float:
    """Dissimilarity of units i and j over observed shared columns.

    ``candidate_times`` defaults to every column except ``exclude_time``.
    """
    if i == j:
        raise InvalidArgument("unit_distance requires i != j")
    cols = _candidates(candidate_times, panel.n_times, exclude_time)
    return _pair_distance(panel.filled(), panel.mask, i, j, cols)


def time_distance(
    panel: ObservationPanel,
    t: int,
    t2: int,
    exclude_unit: int,
    candidate_units=None,
) -> float:
    """Dissimilarity of columns t and t2 over observed shared rows."""
    if t == t2:
        raise InvalidArgument("time_distance requires t != t2")
    rows = _candidates(candidate_units, panel.n_units, exclude_unit)
    return _pair_distance(panel.filled().T, panel.mask.T, t, t2, rows)


def _candidates(given, size, exclude) -> np.ndarray:
    if given is None:
        idx = np.arange(size, dtype=np.intp)
        return idx[idx != exclude]
    idx = np.asarray(list(given), dtype=np.intp)
    if exclude in idx:
        raise InvalidArgument("candidate set must not contain the excluded index")
    return idx


def _batched_distances(values, mask, anchor, rows, cols):
    """Distances from ``anchor`` to each of ``rows``, over ``cols``."""
    if rows.size == 0 or cols.size == 0:
        return np.full(rows.size, np.inf)
    sub_v = values[np.ix_(rows, cols)]
    sub_m = mask[np.ix_(rows, cols)].astype(np.float64)
    anc_v = values[anchor, cols]
    anc_m = mask[anchor, cols].astype(np.float64)
    w = sub_m * anc_m[None, :]
    diff = sub_v - anc_v[None, :]
    num = np.sum(w * diff * diff, axis=1)
    den = np.sum(w, axis=1)
    out = np.full(rows.size, np.inf)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


def all_unit_distances(
    panel: ObservationPanel,
    i: int,
    exclude_time: int,
    candidate_units=None,
    candidate_times=None,
) -> dict:
    """Map j -> distance for every candidate unit j != i."""
    rows = _candidates(candidate_units, panel.n_units, i)
    cols = _candidates(candidate_times, panel.n_times, exclude_time)
    dists = _batched_distances(panel.filled(), panel.mask, i, rows, cols)
    return {int(j): float(d) for j, d in zip(rows, dists)}


def all_time_distances(
    panel: ObservationPanel,
    t: int,
    exclude_unit: int,
    candidate_times=None,
    candidate_units=None,
) -> dict:
    """Map t' -> distance for every candidate time t' != t."""
    cols = _candidates(candidate_times, panel.n_times, t)
    rows = _candidates(candidate_units, panel.n_units, exclude_unit)
    dists = _batched_distances(panel.filled().T, panel.mask.T, t, cols, rows)
    return {int(tp): float(d) for tp, d in zip(cols, dists)}


def select_neighbors(
    panel: ObservationPanel,
    target: TargetCell,
    eta1: float,
    eta2: float,
    split: SplitAssignment | None = None,
) -> NeighborSets:
    """Threshold the distance maps into neighbor sets for one target.

    Without a split, unit candidates are all rows j != i with distances over
    all columns t' != t (and symmetrically for times).  With a split, unit
    distances are computed over ``time_half_1`` with candidates
    ``unit_half_1``, and time distances over ``unit_half_2`` with candidates
    ``time_half_2``.
    """
    if eta1 < 0 or eta2 < 0:
        raise InvalidArgument("thresholds must be nonnegative")
    target.validate(panel.shape)
    i, t = target.unit, target.time
    if split is None:
        unit_d = all_unit_distances(panel, i, exclude_time=t)
        time_d = all_time_distances(panel, t, exclude_unit=i)
    else:
        unit_d = all_unit_distances(
            panel, i, exclude_time=t,
            candidate_units=split.unit_half_1,
            candidate_times=split.time_half_1,
        )
        time_d = all_time_distances(
            panel, t, exclude_unit=i,
            candidate_times=split.time_half_2,
            candidate_units=split.unit_half_2,
        )
    unit_nbrs = np.array(
        sorted(j for j, d in unit_d.items() if np.isfinite(d) and d <= eta1),
        dtype=np.intp,
    )
    time_nbrs = np.array(
        sorted(tp for tp, d in time_d.items() if np.isfinite(d) and d <= eta2),
        dtype=np.intp,
    )
    return NeighborSets(
        target=target,
        unit_neighbors=unit_nbrs,
        time_neighbors=time_nbrs,
        eta1=float(eta1),
        eta2=float(eta2),
        split=split,
        unit_distances=unit_d,
        time_distances=time_d,
    )
