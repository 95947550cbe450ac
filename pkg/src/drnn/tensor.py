"""Triply robust nearest neighbors for order-3 tensors.

The estimate averages the 7-term inclusion-exclusion combination

    Y[j,t,a] + Y[i,t',a] + Y[i,t,a'] + Y[j,t',a']
      - Y[j,t',a] - Y[j,t,a'] - Y[i,t',a']

over neighbor triples (j, t', a') whose seven cells are all observed; its
bias factorizes as the product of the three per-mode factor errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NoDataError
from .estimators import EntryEstimate
from .panel import ObservationTensor, TargetCell

MODES = ("unit", "time", "intervention")


@dataclass(frozen=True)
class TensorNeighborSets:
    target: TargetCell
    unit_neighbors: np.ndarray
    time_neighbors: np.ndarray
    intervention_neighbors: np.ndarray
    etas: tuple[float, float, float]

    def __post_init__(self):
        for name in ("unit_neighbors", "time_neighbors", "intervention_neighbors"):
            arr = np.asarray(getattr(self, name), dtype=np.intp)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def _mode_views(tensor: ObservationTensor, mode: str):
    """Outcomes/mask with the requested mode rolled to axis 0."""
    axis = MODES.index(mode)
    y = np.moveaxis(tensor.filled(), axis, 0)
    m = np.moveaxis(tensor.mask, axis, 0)
    return y, m


def tensor_mode_distance(
    tensor: ObservationTensor,
    mode: str,
    idx1: int,
    idx2: int,
    exclude: tuple[int, int],
) -> float:
    """Mean squared difference between two mode slices.

    ``exclude`` gives the target's coordinates in the other two modes (in
    mode order); the corresponding slabs are left out of the comparison.
    Zero observed overlap yields +inf.
    """
    if mode not in MODES:
        raise InvalidArgument(f"unknown mode {mode!r}")
    if idx1 == idx2:
        raise InvalidArgument("mode distance requires distinct indices")
    y, m = _mode_views(tensor, mode)
    keep0 = np.arange(y.shape[1]) != exclude[0]
    keep1 = np.arange(y.shape[2]) != exclude[1]
    w = (m[idx1][np.ix_(keep0, keep1)] * m[idx2][np.ix_(keep0, keep1)]).astype(np.float64)
    overlap = w.sum()
    if overlap == 0:
        return np.inf
    diff = y[idx1][np.ix_(keep0, keep1)] - y[idx2][np.ix_(keep0, keep1)]
    return float(np.sum(w * diff * diff) / overlap)


def _mode_distances(tensor, mode, anchor, exclude, candidates):
    y, m = _mode_views(tensor, mode)
    keep0 = np.arange(y.shape[1]) != exclude[0]
    keep1 = np.arange(y.shape[2]) != exclude[1]
    anc_y = y[anchor][np.ix_(keep0, keep1)]
    anc_m = m[anchor][np.ix_(keep0, keep1)].astype(np.float64)
    out = {}
    sub_y = y[candidates][:, keep0][:, :, keep1]
    sub_m = m[candidates][:, keep0][:, :, keep1].astype(np.float64)
    w = sub_m * anc_m[None]
    diff = sub_y - anc_y[None]
    num = np.sum(w * diff * diff, axis=(1, 2))
    den = np.sum(w, axis=(1, 2))
    for k, idx in enumerate(candidates):
        out[int(idx)] = float(num[k] / den[k]) if den[k] > 0 else np.inf
    return out


def tensor_neighbors(
    tensor: ObservationTensor,
    target: TargetCell,
    etas: tuple[float, float, float],
    seed: int = 0,
    split: dict | None = None,
) -> TensorNeighborSets:
    """Inclusive per-mode thresholding of the mode distances.

    ``split`` may restrict the candidate pool per mode
    ({"unit": indices, ...}); by default every non-target index competes.
    """
    if any(e < 0 for e in etas):
        raise InvalidArgument("thresholds must be nonnegative")
    target.validate(tensor.dims)
    coords = (target.unit, target.time, target.intervention)
    sets = []
    for k, mode in enumerate(MODES):
        exclude = tuple(coords[j] for j in range(3) if j != k)
        pool = np.arange(tensor.dims[k], dtype=np.intp)
        if split is not None and mode in split:
            pool = np.asarray(split[mode], dtype=np.intp)
        pool = pool[pool != coords[k]]
        dists = _mode_distances(tensor, mode, coords[k], exclude, pool)
        sets.append(np.array(
            sorted(i for i, d in dists.items() if np.isfinite(d) and d <= etas[k]),
            dtype=np.intp,
        ))
    return TensorNeighborSets(
        target=target,
        unit_neighbors=sets[0],
        time_neighbors=sets[1],
        intervention_neighbors=sets[2],
        etas=tuple(float(e) for e in etas),
    )


def _tr_average(tensor, i, t, a, units, times, ints):
    if units.size == 0 or times.size == 0 or ints.size == 0:
        return np.nan, 0, 0, 0
    y = tensor.filled()
    m = tensor.mask.astype(np.float64)
    m_jta = m[units, t, a]
    m_itpa = m[i, times, a]
    m_itap = m[i, t, ints]
    m_cube = m[np.ix_(units, times, ints)]
    m_jtpa = m[np.ix_(units, times, [a])][:, :, 0]
    m_jtap = m[np.ix_(units, [t], ints)][:, 0, :]
    m_itpap = m[np.ix_([i], times, ints)][0]
    w = (
        m_jta[:, None, None] * m_itpa[None, :, None] * m_itap[None, None, :]
        * m_cube * m_jtpa[:, :, None] * m_jtap[:, None, :] * m_itpap[None, :, :]
    )
    n_terms = int(w.sum())
    if n_terms == 0:
        return np.nan, int(m_jta.sum()), int(m_itpa.sum()), 0
    vals = (
        y[units, t, a][:, None, None]
        + y[i, times, a][None, :, None]
        + y[i, t, ints][None, None, :]
        + y[np.ix_(units, times, ints)]
        - y[np.ix_(units, times, [a])][:, :, 0][:, :, None]
        - y[np.ix_(units, [t], ints)][:, 0, :][:, None, :]
        - y[np.ix_([i], times, ints)][0][None, :, :]
    )
    value = float(np.sum(w * vals) / w.sum())
    return value, int(m_jta.sum()), int(m_itpa.sum()), n_terms


def _tensor_fallback(tensor, target, etas):
    i, t, a = target.unit, target.time, target.intervention
    if tensor.mask[i, t, a]:
        return EntryEstimate(target, "fallback_observed", tensor.value(i, t, a),
                             eta=etas[:2])
    units = np.array([j for j in range(tensor.dims[0]) if j != i], dtype=np.intp)
    times = np.array([tp for tp in range(tensor.dims[1]) if tp != t], dtype=np.intp)
    ints = np.array([ap for ap in range(tensor.dims[2]) if ap != a], dtype=np.intp)
    value, nu, nt, nc = _tr_average(tensor, i, t, a, units, times, ints)
    if not np.isfinite(value):
        value = float(tensor.outcomes[tensor.mask.astype(bool)].mean())
        nu = nt = nc = 0
    return EntryEstimate(target, "fallback_global", value, n_unit_used=nu,
                         n_time_used=nt, n_cross_terms=nc, eta=etas[:2])


def estimate_tr_nn(
    tensor: ObservationTensor, neighbors: TensorNeighborSets
) -> EntryEstimate:
    """Triply robust estimate from pre-selected per-mode neighbor sets."""
    target = neighbors.target
    value, nu, nt, nc = _tr_average(
        tensor, target.unit, target.time, target.intervention,
        neighbors.unit_neighbors, neighbors.time_neighbors,
        neighbors.intervention_neighbors,
    )
    if nc == 0:
        return _tensor_fallback(tensor, target, neighbors.etas)
    return EntryEstimate(target, "tr_nn", value, n_unit_used=nu,
                         n_time_used=nt, n_cross_terms=nc,
                         eta=neighbors.etas[:2])


def estimate_tensor_vanilla(
    tensor: ObservationTensor, neighbors: TensorNeighborSets, mode: str = "unit"
) -> EntryEstimate:
    """Single-mode average (e.g. unit-NN over Y[j, t, a]) for comparison."""
    target = neighbors.target
    i, t, a = target.unit, target.time, target.intervention
    idx = {
        "unit": neighbors.unit_neighbors,
        "time": neighbors.time_neighbors,
        "intervention": neighbors.intervention_neighbors,
    }[mode]
    if mode == "unit":
        cells = (idx, np.full(idx.size, t), np.full(idx.size, a))
    elif mode == "time":
        cells = (np.full(idx.size, i), idx, np.full(idx.size, a))
    else:
        cells = (np.full(idx.size, i), np.full(idx.size, t), idx)
    obs = tensor.mask[cells].astype(bool) if idx.size else np.zeros(0, bool)
    n = int(obs.sum())
    if n == 0:
        return _tensor_fallback(tensor, target, neighbors.etas)
    value = float(tensor.outcomes[cells][obs].mean())
    tag = {"unit": "unit_nn", "time": "time_nn", "intervention": "intervention_nn"}[mode]
    counts = {"unit": "n_unit_used", "time": "n_time_used"}.get(mode)
    kwargs = {counts: n} if counts else {}
    return EntryEstimate(target, tag, value, eta=neighbors.etas[:2], **kwargs)


def estimate_tensor_entry(
    tensor: ObservationTensor,
    target: TargetCell,
    etas: tuple[float, float, float],
    method: str = "tr",
    seed: int = 0,
) -> EntryEstimate:
    """Neighbor selection plus estimation for one tensor cell."""
    if tensor.mask.sum() == 0:
        raise NoDataError("tensor has no observed entries")
    nbrs = tensor_neighbors(tensor, target, etas, seed)
    if method == "tr":
        return estimate_tr_nn(tensor, nbrs)
    return estimate_tensor_vanilla(tensor, nbrs, mode=method)
