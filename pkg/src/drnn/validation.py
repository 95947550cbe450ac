"""Seeded holdout construction shared by tuning and noise estimation."""

from __future__ import annotations

import numpy as np

from .errors import InsufficientData
from .estimators import estimate_entry
from .panel import ObservationPanel, TargetCell
from .seeding import rng_for

MIN_OBSERVED = 20


def holdout_split(
    panel: ObservationPanel,
    holdout_fraction: float,
    seed: int,
    max_cells: int | None = None,
):
    """Mask a random fraction of observed cells for validation.

    Returns (train_panel, cells, true_values).  ``max_cells`` bounds the
    holdout size to keep grid searches affordable on large panels.
    """
    if not 0 < holdout_fraction <= 0.5:
        raise InsufficientData(
            f"holdout_fraction must be in (0, 0.5], got {holdout_fraction}"
        )
    observed = np.argwhere(panel.mask == 1)
    if observed.shape[0] < MIN_OBSERVED:
        raise InsufficientData(
            f"need at least {MIN_OBSERVED} observed cells, have {observed.shape[0]}"
        )
    n_hold = max(1, int(round(holdout_fraction * observed.shape[0])))
    if max_cells is not None:
        n_hold = min(n_hold, max_cells)
    rng = rng_for(seed, "holdout")
    pick = rng.choice(observed.shape[0], size=n_hold, replace=False)
    cells = [TargetCell(int(i), int(t)) for i, t in observed[pick]]
    mask = panel.mask.copy()
    for c in cells:
        mask[c.unit, c.time] = 0
    train = ObservationPanel(np.where(mask == 1, panel.outcomes, np.nan), mask)
    truths = np.array([panel.value(c.unit, c.time) for c in cells])
    return train, cells, truths


def holdout_mse(
    train: ObservationPanel,
    cells,
    truths: np.ndarray,
    eta: tuple[float, float],
    method: str,
    split_seed: int | None,
    max_neighbors: int | None = None,
) -> float:
    """Mean squared completion error on the held-out cells."""
    preds = np.array([
        estimate_entry(train, c, eta, split_seed, method, max_neighbors).value
        for c in cells
    ])
    return float(np.mean((preds - truths) ** 2))
