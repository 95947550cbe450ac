"""Unit-NN, time-NN and doubly robust NN point estimates.

The doubly robust estimate averages Y[i, t'] + Y[j, t] - Y[j, t'] over all
cross pairs of unit neighbors j and time neighbors t' whose three cells are
observed.  When a denominator is zero the estimate falls back, in order, to
the observed value at the target cell and then to the same summation run
over all rows/columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoDataError
from .neighbors import NeighborSets, make_split, select_neighbors
from .panel import ObservationPanel, TargetCell
from .seeding import rng_for

METHODS = ("unit", "time", "dr")


@dataclass(frozen=True)
class EntryEstimate:
    """Point estimate for one cell with its observation counts.

    ``n_unit_used`` is the number of observed unit-neighbor outcomes in the
    target column, ``n_time_used`` the observed time-neighbor outcomes in the
    target row, and ``n_cross_terms`` the number of fully observed cross
    triples; these are the three denominators behind the effective sample
    size.
    """

    target: TargetCell
    method: str
    value: float
    n_unit_used: int = 0
    n_time_used: int = 0
    n_cross_terms: int = 0
    eta: tuple[float, float] = (np.inf, np.inf)


def _unit_average(panel, t, units):
    obs = panel.mask[units, t].astype(bool) if units.size else np.zeros(0, bool)
    n = int(obs.sum())
    if n == 0:
        return np.nan, 0
    return float(panel.outcomes[units[obs], t].mean()), n


def _time_average(panel, i, times):
    obs = panel.mask[i, times].astype(bool) if times.size else np.zeros(0, bool)
    n = int(obs.sum())
    if n == 0:
        return np.nan, 0
    return float(panel.outcomes[i, times[obs]].mean()), n


def _dr_average(panel, i, t, units, times):
    """Returns (value, n_unit_obs, n_time_obs, n_cross)."""
    if units.size == 0 or times.size == 0:
        return np.nan, 0, 0, 0
    y = panel.filled()
    m = panel.mask.astype(np.float64)
    w = m[i, times][None, :] * m[units, t][:, None] * m[np.ix_(units, times)]
    n_cross = int(w.sum())
    n_unit = int(m[units, t].sum())
    n_time = int(m[i, times].sum())
    if n_cross == 0:
        return np.nan, n_unit, n_time, 0
    vals = y[i, times][None, :] + y[units, t][:, None] - y[np.ix_(units, times)]
    return float(np.sum(w * vals) / w.sum()), n_unit, n_time, n_cross


def _global_mean(panel):
    obs = panel.mask.astype(bool)
    return float(panel.outcomes[obs].mean())


def _fallback(panel, target, method, eta):
    """Observed value first, then the summation over all rows/columns."""
    i, t = target.unit, target.time
    if panel.mask[i, t]:
        return EntryEstimate(target, "fallback_observed", panel.value(i, t), eta=eta)
    all_units = np.array([j for j in range(panel.n_units) if j != i], dtype=np.intp)
    all_times = np.array([tp for tp in range(panel.n_times) if tp != t], dtype=np.intp)
    if method == "unit":
        value, n = _unit_average(panel, t, all_units)
        counts = dict(n_unit_used=n)
    elif method == "time":
        value, n = _time_average(panel, i, all_times)
        counts = dict(n_time_used=n)
    else:
        value, nu, nt, nc = _dr_average(panel, i, t, all_units, all_times)
        counts = dict(n_unit_used=nu, n_time_used=nt, n_cross_terms=nc)
    if not np.isfinite(value):
        # Even the global summation is empty for this cell; last resort is
        # the mean of everything observed.
        value = _global_mean(panel)
        counts = {}
    return EntryEstimate(target, "fallback_global", value, eta=eta, **counts)


def estimate_unit_nn(panel: ObservationPanel, neighbors: NeighborSets) -> EntryEstimate:
    """Average the unit-neighbor outcomes at the target time."""
    target = neighbors.target
    eta = (neighbors.eta1, neighbors.eta2)
    value, n = _unit_average(panel, target.time, neighbors.unit_neighbors)
    if n == 0:
        return _fallback(panel, target, "unit", eta)
    return EntryEstimate(target, "unit_nn", value, n_unit_used=n, eta=eta)


def estimate_time_nn(panel: ObservationPanel, neighbors: NeighborSets) -> EntryEstimate:
    """Average the target unit's outcomes at the time neighbors."""
    target = neighbors.target
    eta = (neighbors.eta1, neighbors.eta2)
    value, n = _time_average(panel, target.unit, neighbors.time_neighbors)
    if n == 0:
        return _fallback(panel, target, "time", eta)
    return EntryEstimate(target, "time_nn", value, n_time_used=n, eta=eta)


def estimate_dr_nn(panel: ObservationPanel, neighbors: NeighborSets) -> EntryEstimate:
    """Cross inclusion-exclusion average over unit x time neighbors."""
    target = neighbors.target
    eta = (neighbors.eta1, neighbors.eta2)
    value, nu, nt, nc = _dr_average(
        panel, target.unit, target.time,
        neighbors.unit_neighbors, neighbors.time_neighbors,
    )
    if nc == 0:
        return _fallback(panel, target, "dr", eta)
    return EntryEstimate(
        target, "dr_nn", value,
        n_unit_used=nu, n_time_used=nt, n_cross_terms=nc, eta=eta,
    )


_ESTIMATORS = {"unit": estimate_unit_nn, "time": estimate_time_nn, "dr": estimate_dr_nn}


def _subsample(idx: np.ndarray, cap, rng) -> np.ndarray:
    if cap is None or idx.size <= cap:
        return idx
    return np.sort(rng.choice(idx, size=int(cap), replace=False))


def estimate_entry(
    panel: ObservationPanel,
    target: TargetCell,
    eta: tuple[float, float],
    split_seed: int | None = None,
    method: str = "dr",
    max_neighbors: int | None = None,
    split_mode: str = "bernoulli_half",
) -> EntryEstimate:
    """Select neighbors for one cell and run the requested estimator.

    With ``split_seed`` set, neighbor selection uses a per-cell 2x2 split.
    ``max_neighbors`` subsamples each neighbor set without replacement,
    seeded by (split_seed, cell), before estimation.
    """
    if method not in _ESTIMATORS:
        raise ValueError(f"unknown method {method!r}")
    if panel.n_observed() == 0:
        raise NoDataError("panel has no observed entries")
    split = None
    if split_seed is not None:
        split = make_split(panel.n_units, panel.n_times, target, split_seed, split_mode)
    nbrs = select_neighbors(panel, target, eta[0], eta[1], split)
    if max_neighbors is not None:
        rng = rng_for(split_seed or 0, "subsample", target.unit, target.time)
        nbrs = NeighborSets(
            target=nbrs.target,
            unit_neighbors=_subsample(nbrs.unit_neighbors, max_neighbors, rng),
            time_neighbors=_subsample(nbrs.time_neighbors, max_neighbors, rng),
            eta1=nbrs.eta1,
            eta2=nbrs.eta2,
            split=nbrs.split,
            unit_distances=nbrs.unit_distances,
            time_distances=nbrs.time_distances,
        )
    return _ESTIMATORS[method](panel, nbrs)


def complete_matrix(
    panel: ObservationPanel,
    eta: tuple[float, float],
    method: str = "dr",
    split_seed: int | None = None,
    targets: list[TargetCell] | None = None,
    max_neighbors: int | None = None,
) -> list[EntryEstimate]:
    """Estimate every requested cell (default: all cells, row-major)."""
    if panel.n_observed() == 0:
        raise NoDataError("panel has no observed entries")
    if targets is None:
        targets = [
            TargetCell(i, t)
            for i in range(panel.n_units)
            for t in range(panel.n_times)
        ]
    return [
        estimate_entry(panel, tc, eta, split_seed, method, max_neighbors)
        for tc in targets
    ]


@dataclass(frozen=True)
class CounterfactualEstimates:
    """Per-arm completions of a two-mask counterfactual panel.

    A side that has no observations at all carries ``None`` estimates and
    the error message instead.
    """

    control: list[EntryEstimate] | None
    treated: list[EntryEstimate] | None
    control_error: str | None = None
    treated_error: str | None = None


def counterfactual_estimates(
    outcomes: np.ndarray,
    treatment: np.ndarray,
    eta: tuple[float, float],
    method: str = "dr",
    split_seed: int | None = None,
) -> CounterfactualEstimates:
    """Complete the treated surface (mask = treatment) and the control
    surface (mask = 1 - treatment) as two independent problems."""
    outcomes = np.asarray(outcomes, dtype=np.float64)
    treatment = np.asarray(treatment)
    if outcomes.shape != treatment.shape:
        raise ValueError("outcomes and treatment must share a shape")
    treatment = treatment.astype(np.uint8)
    results, errors = [], []
    for side_mask in (1 - treatment, treatment):
        masked = np.where(side_mask == 1, outcomes, np.nan)
        try:
            panel = ObservationPanel(masked, side_mask)
            results.append(complete_matrix(panel, eta, method, split_seed))
            errors.append(None)
        except NoDataError as exc:
            results.append(None)
            errors.append(str(exc))
    return CounterfactualEstimates(
        control=results[0], treated=results[1],
        control_error=errors[0], treated_error=errors[1],
    )
