"""Masked outcome matrices/tensors and their CSV round-trip.

The mask is authoritative: a cell with mask 0 carries no usable outcome.
Internally every masked-out cell is forced to a quiet NaN so that an
accidental read of ``outcomes`` at such a cell poisons downstream results
and gets caught by tests.  Code that needs arithmetic over the full array
should go through :meth:`ObservationPanel.filled`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidArgument, IoError, ParseError

DEFAULT_MISSING_TOKEN = "NA"


def _normalize(outcomes: np.ndarray, mask: np.ndarray, ndim: int):
    outcomes = np.asarray(outcomes, dtype=np.float64)
    mask = np.asarray(mask)
    if outcomes.ndim != ndim or mask.ndim != ndim:
        raise ConfigError(f"expected {ndim}-dimensional outcomes and mask")
    if outcomes.shape != mask.shape:
        raise ConfigError(
            f"outcomes shape {outcomes.shape} != mask shape {mask.shape}"
        )
    if not np.all((mask == 0) | (mask == 1)):
        raise ConfigError("mask entries must be 0 or 1")
    mask = mask.astype(np.uint8)
    if not np.all(np.isfinite(outcomes[mask == 1])):
        raise ConfigError("observed outcomes must be finite")
    outcomes = np.where(mask == 1, outcomes, np.nan)
    outcomes.flags.writeable = False
    mask.flags.writeable = False
    return outcomes, mask


@dataclass(frozen=True)
class ObservationPanel:
    """An n_units x n_times outcome matrix plus a binary observation mask."""

    outcomes: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        outcomes, mask = _normalize(self.outcomes, self.mask, ndim=2)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "mask", mask)

    @property
    def n_units(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_times(self) -> int:
        return self.outcomes.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.outcomes.shape

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Outcomes with masked-out cells replaced by ``fill`` (safe for arithmetic)."""
        return np.where(self.mask == 1, self.outcomes, fill)

    def value(self, i: int, t: int) -> float:
        """Observed outcome at (i, t); asserts the cell is observed."""
        assert self.mask[i, t] == 1, f"read of masked-out cell ({i}, {t})"
        return float(self.outcomes[i, t])

    def n_observed(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class ObservationTensor:
    """Order-3 outcome tensor (units x times x interventions) plus mask.

    An all-ones mask is the pure denoising case.
    """

    outcomes: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        outcomes, mask = _normalize(self.outcomes, self.mask, ndim=3)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "mask", mask)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.outcomes.shape

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.mask == 1, self.outcomes, fill)

    def value(self, i: int, t: int, a: int) -> float:
        assert self.mask[i, t, a] == 1, f"read of masked-out cell ({i}, {t}, {a})"
        return float(self.outcomes[i, t, a])

    def slice_panel(self, a: int) -> ObservationPanel:
        """The a-th intervention slice as a matrix panel."""
        return ObservationPanel(self.outcomes[:, :, a], self.mask[:, :, a])


@dataclass(frozen=True)
class TargetCell:
    """Index of the entry being estimated."""

    unit: int
    time: int
    intervention: int | None = None

    def validate(self, shape) -> None:
        if not (0 <= self.unit < shape[0] and 0 <= self.time < shape[1]):
            raise InvalidArgument(f"target {self} out of bounds for shape {shape}")
        if len(shape) == 3:
            if self.intervention is None or not 0 <= self.intervention < shape[2]:
                raise InvalidArgument(
                    f"target {self} out of bounds for shape {shape}"
                )


def _check_token(missing_token: str) -> str:
    try:
        float(missing_token)
    except ValueError:
        return missing_token
    raise ConfigError(f"missing token {missing_token!r} must be non-numeric")


def load_panel(path, missing_token: str = DEFAULT_MISSING_TOKEN) -> ObservationPanel:
    """Parse a comma-delimited panel; ``missing_token`` cells become mask 0.

    Lines starting with '#' are treated as an optional header and skipped.
    """
    _check_token(missing_token)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        row_vals, row_mask = [], []
        for cell in cells:
            if cell == missing_token:
                row_vals.append(np.nan)
                row_mask.append(0)
            else:
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"line {lineno}: cell {cell!r} is neither numeric nor "
                        f"the missing token {missing_token!r}"
                    ) from None
                if not np.isfinite(v):
                    raise ParseError(f"line {lineno}: non-finite value {cell!r}")
                row_vals.append(v)
                row_mask.append(1)
        rows.append((row_vals, row_mask))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0][0])
    if any(len(v) != width for v, _ in rows):
        raise ParseError(f"{path}: ragged rows (expected width {width})")
    outcomes = np.array([v for v, _ in rows], dtype=np.float64)
    mask = np.array([m for _, m in rows], dtype=np.uint8)
    return ObservationPanel(outcomes, mask)


def save_panel(
    panel: ObservationPanel, path, missing_token: str = DEFAULT_MISSING_TOKEN
) -> None:
    """Write the panel as CSV; round-trips exactly through :func:`load_panel`.

    Observed values are printed at 17 significant digits, which is lossless
    for float64.
    """
    _check_token(missing_token)
    if panel.n_units == 0 or panel.n_times == 0:
        raise IoError("EmptyPanel: refusing to write a zero-sized panel")
    lines = [f"# units={panel.n_units} times={panel.n_times}"]
    for i in range(panel.n_units):
        cells = [
            f"{panel.outcomes[i, t]:.17g}" if panel.mask[i, t] else missing_token
            for t in range(panel.n_times)
        ]
        lines.append(",".join(cells))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def mask_density(panel: ObservationPanel) -> float:
    """Fraction of observed cells (the empirical observation probability)."""
    return float(panel.mask.mean())


def save_tensor(
    tensor: ObservationTensor,
    manifest_path,
    missing_token: str = DEFAULT_MISSING_TOKEN,
) -> None:
    """Write one CSV per intervention slice plus a JSON manifest.

    Slice files are placed next to the manifest and listed in intervention
    order.
    """
    manifest_path = Path(manifest_path)
    n_units, n_times, n_int = tensor.dims
    if n_int == 0:
        raise IoError("EmptyTensor: no intervention slices")
    stem = manifest_path.stem
    slice_names = []
    for a in range(n_int):
        name = f"{stem}_slice{a}.csv"
        save_panel(tensor.slice_panel(a), manifest_path.parent / name, missing_token)
        slice_names.append(name)
    manifest = {"slices": slice_names, "missing_token": missing_token}
    try:
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_tensor(manifest_path) -> ObservationTensor:
    """Read a tensor from a manifest produced by :func:`save_tensor`."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: bad manifest: {exc}") from exc
    names = manifest.get("slices")
    if not names:
        raise ParseError(f"{manifest_path}: manifest lists no slices")
    token = manifest.get("missing_token", DEFAULT_MISSING_TOKEN)
    panels = [load_panel(manifest_path.parent / name, token) for name in names]
    shape = panels[0].shape
    if any(p.shape != shape for p in panels):
        raise ParseError(f"{manifest_path}: slices have inconsistent shapes")
    outcomes = np.stack([p.filled(np.nan) for p in panels], axis=2)
    mask = np.stack([p.mask for p in panels], axis=2)
    return ObservationTensor(outcomes, mask)
