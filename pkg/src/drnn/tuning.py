"""Threshold selection: theory-driven plug-in rules and validation search.

The plug-in rules set eta = 2 sigma^2 plus a concentration margin
chi / (p sqrt(T)) (unit side) or chi / (p sqrt(N)) (time side), with
chi = c * sqrt(log(max(N, T) / delta)) and a user-tunable constant ``c``
standing in for the unspecified universal constants.  The continuous-factor
rule adds the neighbor-radius term c * N^(-2/(d+4)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .panel import ObservationPanel
from .validation import holdout_mse, holdout_split


@dataclass
class TuningRule:
    mode: str = "validation"  # theory_discrete | theory_continuous | validation
    sigma_sq: float = 0.0
    plugin_constant: float = 1.0
    delta: float = 0.05
    d: int | None = None
    grid: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("theory_discrete", "theory_continuous", "validation"):
            raise ConfigError(f"unknown tuning mode {self.mode!r}")
        if self.mode == "validation" and not self.grid:
            raise ConfigError("validation mode requires a nonempty grid")
        if self.mode == "theory_continuous" and self.d is None:
            raise ConfigError("theory_continuous requires the factor dimension d")


def theory_eta(
    n_units: int,
    n_times: int,
    p: float,
    sigma_sq: float,
    c: float = 1.0,
    delta: float = 0.05,
    regime: str = "discrete",
    d: int | None = None,
) -> tuple[float, float]:
    """Plug-in thresholds (eta1, eta2) for the two factor regimes.

    Unit distances average over n_times columns and time distances over
    n_units rows, so eta1 carries the sqrt(n_times) margin and eta2 the
    sqrt(n_units) one.
    """
    if not 0 < p <= 1:
        raise ConfigError(f"p must be in (0, 1], got {p}")
    if n_units < 2 or n_times < 2:
        raise ConfigError("need at least 2 units and 2 times")
    chi = c * math.sqrt(math.log(max(n_units, n_times) / delta))
    err1 = chi / (p * math.sqrt(n_times))
    err2 = chi / (p * math.sqrt(n_units))
    if regime == "discrete":
        return 2 * sigma_sq + 2 * err1, 2 * sigma_sq + 2 * err2
    if regime == "continuous":
        if d is None:
            raise ConfigError("continuous regime requires d")
        r1 = c * n_units ** (-2.0 / (d + 4))
        r2 = c * n_times ** (-2.0 / (d + 4))
        return 2 * sigma_sq + err1 + r1, 2 * sigma_sq + err2 + r2
    raise ConfigError(f"unknown regime {regime!r}")


def validation_tune(
    panel: ObservationPanel,
    grid,
    method: str = "dr",
    split_seed: int | None = None,
    holdout_fraction: float = 0.2,
    max_cells: int | None = 400,
    max_neighbors: int | None = None,
    use_split: bool = False,
):
    """Grid search minimizing seeded-holdout MSE.

    ``split_seed`` seeds the holdout draw; completions use a 2x2 split only
    when ``use_split`` is set.  Returns ((eta1, eta2), table) where the
    table rows are (eta1, eta2, mse).  Ties go to the smaller eta1 + eta2,
    then lexicographic, so the result does not depend on grid order.
    """
    grid = [(float(e1), float(e2)) for e1, e2 in grid]
    if not grid:
        raise ConfigError("validation grid must be nonempty")
    train, cells, truths = holdout_split(
        panel, holdout_fraction, seed=0 if split_seed is None else split_seed,
        max_cells=max_cells,
    )
    est_split = split_seed if use_split else None
    table = []
    for eta in grid:
        mse = holdout_mse(train, cells, truths, eta, method, est_split, max_neighbors)
        table.append((eta[0], eta[1], mse))
    best = min(table, key=lambda row: (row[2], row[0] + row[1], row[0], row[1]))
    return (best[0], best[1]), table
