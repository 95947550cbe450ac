"""Seeded Monte Carlo experiments: rate sweeps, robustness stress tests,
interval coverage, and the tensor demo.

Replication seeds are a splitmix64 mix of (base_seed, N, T, rep_index), so
any single row is reproducible in isolation and the aggregate output does
not depend on the worker count.  Thresholds are tuned once per
(size, method) on a dedicated pilot instance and then frozen for all
replications of that size.

Vanilla unit-/time-NN runs cap their neighbor count at ceil(sqrt(pool)) by
default.  Their averages can only be certified down to the distance
concentration slack, so the interval construction is only safe when the
count grows no faster than the square root of the panel dimension; the
doubly robust estimate has no such constraint because its bias is a product
of the two per-side errors.  The cap is configurable (``vanilla_cap``).
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError, DrnnError, IoError
from .estimators import estimate_entry
from .inference import confidence_interval, estimate_noise_variance, normal_quantile
from .panel import ObservationPanel, TargetCell
from .seeding import mix_seed, rng_for
from .synthetic import (
    SurfaceConfig,
    build_theta,
    gen_discrete_factors,
    gen_continuous_factors,
    gen_mask,
    gen_noise,
    instance_from_dict,
)
from .tensor import ObservationTensor, estimate_tensor_vanilla, estimate_tr_nn, tensor_neighbors
from .tuning import theory_eta, validation_tune

SCENARIOS = ("rate_sweep", "robustness", "improvement", "coverage", "tensor_demo")

RESULT_FIELDS = (
    "scenario", "N", "T", "p", "sigma", "method", "replication",
    "target_i", "target_t", "sq_error", "ci_covered", "ci_width",
    "n_unit", "n_time", "eta1", "eta2", "wall_ms",
)


@dataclass
class ResultRow:
    scenario: str
    N: int
    T: int
    p: float
    sigma: float
    method: str
    replication: int
    target_i: int
    target_t: int
    sq_error: float | None
    ci_covered: bool | None
    ci_width: float | None
    n_unit: int
    n_time: int
    eta1: float
    eta2: float
    wall_ms: float


@dataclass
class ExperimentConfig:
    scenario: str = "rate_sweep"
    sizes: list = field(default_factory=lambda: [(64, 64)])
    replications: int = 20
    generator: dict = field(default_factory=dict)
    methods: tuple = ("unit", "time", "dr")
    tuning: dict = field(default_factory=lambda: {"mode": "validation"})
    alpha: float = 0.05
    base_seed: int = 0
    output_path: str | None = None
    summary_path: str | None = None
    use_split: bool = False
    sigma_mode: str = "known"  # known | estimated
    vanilla_cap: str | int | None = "sqrt"
    dr_max_neighbors: str | int | None = "auto"
    target_mode: str = "any"  # any | missing
    targets_per_rep: int = 1
    workers: int = 1
    tensor: dict = field(default_factory=dict)
    robustness: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.sizes:
            raise ConfigError("sizes must be nonempty")
        self.sizes = [tuple(int(x) for x in s) for s in self.sizes]
        self.methods = tuple(self.methods)


def config_from_dict(raw: dict) -> ExperimentConfig:
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**raw)


def config_from_file(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".toml", ".tml"):
        try:
            import tomllib  # py >= 3.11
        except ImportError:
            import tomli as tomllib
        raw = tomllib.loads(text)
    else:
        raw = json.loads(text)
    return config_from_dict(raw)


def _cap_for(config: ExperimentConfig, method: str, n_units: int, n_times: int):
    """Neighbor-count cap keeping each method inside its certified-bias regime.

    A vanilla average is only certified down to the distance-concentration
    slack ~T^(-1/2), so its count may grow no faster than sqrt(pool).  The
    doubly robust bias is the product of the two per-side slacks: with
    discrete factors (exact duplicates) any count is safe, while with
    continuous factors the bias-variance balance caps the per-side count at
    pool^(4/(d+4)).
    """
    if method == "dr":
        cap = config.dr_max_neighbors
        if cap != "auto":
            return None if cap in (None, 0) else int(cap)
        fac = config.generator.get("factor", {})
        if fac.get("kind") != "continuous":
            return None
        d = int(fac.get("d", 2))
        pool = min(n_units, n_times) - 1
        return max(1, math.ceil(pool ** (4.0 / (d + 4))))
    cap = config.vanilla_cap
    if cap is None:
        return None
    if cap == "sqrt":
        pool = (n_units if method == "unit" else n_times) - 1
        return max(1, math.ceil(math.sqrt(pool)))
    return int(cap)


def quantile_grid(
    panel: ObservationPanel,
    seed: int = 0,
    levels=(0.02, 0.04, 0.07, 0.12, 0.2, 0.3, 0.45),
    n_probes: int = 3,
    corners: bool = True,
):
    """Threshold grid from empirical distance quantiles.

    Pools unit/time distances around a few random probe cells and pairs the
    per-side quantiles level by level; ``corners`` adds one very wide eta1
    and one very wide eta2 point so searches can trade the two sides off.
    """
    from .neighbors import all_time_distances, all_unit_distances

    rng = rng_for(seed, "grid-probes")
    unit_pool, time_pool = [], []
    for _ in range(n_probes):
        i = int(rng.integers(0, panel.n_units))
        t = int(rng.integers(0, panel.n_times))
        unit_pool.extend(
            v for v in all_unit_distances(panel, i, exclude_time=t).values()
            if math.isfinite(v)
        )
        time_pool.extend(
            v for v in all_time_distances(panel, t, exclude_unit=i).values()
            if math.isfinite(v)
        )
    if not unit_pool or not time_pool:
        raise ConfigError("no finite distances available to build a grid")
    qu = np.quantile(unit_pool, levels)
    qt = np.quantile(time_pool, levels)
    grid = [(float(a), float(b)) for a, b in zip(qu, qt)]
    if corners:
        wide_u = float(max(unit_pool) * 1.001)
        wide_t = float(max(time_pool) * 1.001)
        mid = len(levels) // 2
        grid.append((wide_u, float(qt[mid])))
        grid.append((float(qu[mid]), wide_t))
    return grid


def _tuned_etas(config: ExperimentConfig, size, instance) -> dict:
    """One (eta1, eta2) pair per method for this size."""
    n_units, n_times = size
    mode = config.tuning.get("mode", "validation")
    sigma = float(config.generator.get("sigma", 0.0))
    p = float(config.generator.get("p", 1.0))
    if mode.startswith("theory"):
        kind = config.generator.get("factor", {}).get("kind", "discrete")
        regime = "continuous" if kind == "continuous" else "discrete"
        eta = theory_eta(
            n_units, n_times, p,
            sigma_sq=config.tuning.get("sigma_sq", sigma ** 2),
            c=config.tuning.get("plugin_constant", 1.0),
            delta=config.tuning.get("delta", 0.05),
            regime=regime,
            d=config.generator.get("factor", {}).get("d", 2),
        )
        return {m: eta for m in config.methods}
    grid = config.tuning.get("grid") or quantile_grid(
        instance.panel, seed=mix_seed(config.base_seed, n_units, n_times, "grid"),
        corners=bool(config.tuning.get("corners", False)),
    )
    holdout = config.tuning.get("holdout_fraction", 0.2)
    max_cells = config.tuning.get("holdout_max_cells", 200)
    n_pilots = int(config.tuning.get("pilots", 3))
    pilots = [instance]
    for k in range(1, n_pilots):
        pilots.append(instance_from_dict(
            config.generator, n_units, n_times,
            mix_seed(config.base_seed, n_units, n_times, "pilot", k),
        ))
    etas = {}
    for m in config.methods:
        cap = _cap_for(config, m, n_units, n_times)
        tables = []
        for k, pilot in enumerate(pilots):
            _, table = validation_tune(
                pilot.panel, grid, method=m,
                split_seed=mix_seed(config.base_seed, "tune", m, k),
                holdout_fraction=holdout, max_cells=max_cells, max_neighbors=cap,
            )
            tables.append(table)
        pooled = [
            (row[0][0], row[0][1], float(np.mean([r[2] for r in row])))
            for row in zip(*tables)
        ]
        best = min(pooled, key=lambda r: (r[2], r[0] + r[1], r[0], r[1]))
        etas[m] = (best[0], best[1])
    return etas


def _pick_target(panel: ObservationPanel, rng, mode: str) -> TargetCell:
    if mode == "missing":
        missing = np.argwhere(panel.mask == 0)
        if missing.shape[0] > 0:
            i, t = missing[rng.integers(0, missing.shape[0])]
            return TargetCell(int(i), int(t))
    return TargetCell(
        int(rng.integers(0, panel.n_units)), int(rng.integers(0, panel.n_times))
    )


def _sigma_sq_for_rep(config, instance, eta, rep_seed) -> float:
    if config.sigma_mode == "known":
        return float(instance.noise_sigma) ** 2
    grid = [eta, (eta[0] * 0.7, eta[1] * 0.7), (eta[0] * 1.4, eta[1] * 1.4)]
    return estimate_noise_variance(
        instance.panel, grid, method="dr",
        split_seed=mix_seed(rep_seed, "sigma"),
        holdout_fraction=0.2, max_cells=120,
    )


def run_replication(config: ExperimentConfig, size, rep_index: int, etas: dict | None = None):
    """All result rows for one generated instance.

    Estimation failures are recorded as rows with an empty sq_error rather
    than aborting the replication.
    """
    n_units, n_times = size
    rep_seed = mix_seed(config.base_seed, n_units, n_times, rep_index)
    if config.scenario == "robustness":
        instance = _outlier_instance(config, size, rep_seed)
    else:
        instance = instance_from_dict(config.generator, n_units, n_times, rep_seed)
    if etas is None:
        etas = _tuned_etas(config, size, instance)
    rng = rng_for(rep_seed, "target")
    p = float(instance.obs_prob)
    sigma = float(instance.noise_sigma)
    want_ci = config.scenario in ("coverage", "improvement")
    split_seed = mix_seed(rep_seed, "split") if config.use_split else None
    sig_sq = None
    if want_ci:
        ref_eta = etas.get("dr") or next(iter(etas.values()))
        sig_sq = _sigma_sq_for_rep(config, instance, ref_eta, rep_seed)
    rows = []
    for _ in range(config.targets_per_rep):
        target = _pick_target(instance.panel, rng, config.target_mode)
        if config.scenario == "robustness":
            target = TargetCell(0, int(rng.integers(0, n_times)))
        truth = float(instance.theta[target.unit, target.time])
        for method in config.methods:
            eta = etas[method]
            cap = _cap_for(config, method, n_units, n_times)
            start = time.perf_counter()
            try:
                est = estimate_entry(
                    instance.panel, target, eta,
                    split_seed=split_seed, method=method, max_neighbors=cap,
                )
                sq_error = (est.value - truth) ** 2
                covered = width = None
                if want_ci:
                    covered, width = _interval_metrics(
                        est, method, sig_sq, config.alpha, p, truth
                    )
                rows.append(ResultRow(
                    scenario=config.scenario, N=n_units, T=n_times, p=p, sigma=sigma,
                    method=method, replication=rep_index,
                    target_i=target.unit, target_t=target.time,
                    sq_error=sq_error, ci_covered=covered, ci_width=width,
                    n_unit=est.n_unit_used, n_time=est.n_time_used,
                    eta1=eta[0], eta2=eta[1],
                    wall_ms=(time.perf_counter() - start) * 1e3,
                ))
            except DrnnError:
                rows.append(ResultRow(
                    scenario=config.scenario, N=n_units, T=n_times, p=p, sigma=sigma,
                    method=method, replication=rep_index,
                    target_i=target.unit, target_t=target.time,
                    sq_error=None, ci_covered=None, ci_width=None,
                    n_unit=0, n_time=0, eta1=eta[0], eta2=eta[1],
                    wall_ms=(time.perf_counter() - start) * 1e3,
                ))
    return rows


def _interval_metrics(est, method, sigma_sq, alpha, p, truth):
    """Coverage indicator and width for one estimate.

    The doubly robust interval uses the harmonic effective sample size; the
    vanilla methods get the single-denominator width sigma / sqrt(p * count)
    scaled by the same normal quantile.
    """
    sigma_hat = math.sqrt(max(sigma_sq, 0.0))
    if method == "dr":
        counts = (est.n_time_used, est.n_unit_used, est.n_cross_terms)
        if min(counts) <= 0:
            return None, None
        ci = confidence_interval(est.value, counts, sigma_hat, alpha)
        return bool(ci.lower <= truth <= ci.upper), float(ci.width)
    count = est.n_unit_used if method == "unit" else est.n_time_used
    if count <= 0:
        return None, None
    half = normal_quantile(1 - alpha / 2) * sigma_hat / math.sqrt(p * count)
    return bool(est.value - half <= truth <= est.value + half), float(2 * half)


def _outlier_instance(config: ExperimentConfig, size, seed):
    """Bilinear instance whose unit 0 factor is an isolated outlier while
    time factors are discrete with duplicates."""
    from .synthetic import SyntheticInstance, rng_seed

    n_units, n_times = size
    opts = config.robustness
    d = int(opts.get("d", 2))
    m_time = int(opts.get("m_time", 3))
    scale = float(opts.get("outlier_scale", 3.0))
    sigma = float(config.generator.get("sigma", 0.5))
    p = float(config.generator.get("p", 1.0))
    U = gen_continuous_factors(n_units, d, seed=rng_seed(seed, "unit-factors"))
    U[0] = scale / math.sqrt(d)
    V = gen_discrete_factors(n_times, m_time, d, seed=rng_seed(seed, "time-factors"))
    theta = build_theta(U, V, SurfaceConfig(kind="bilinear"))
    noise = gen_noise((n_units, n_times), sigma, seed=rng_seed(seed, "noise"))
    mask = gen_mask((n_units, n_times), p, seed=rng_seed(seed, "mask"))
    panel = ObservationPanel(np.where(mask == 1, theta + noise, np.nan), mask)
    return SyntheticInstance(theta, U, V, sigma, p, panel, seed)


def _robustness_etas(config: ExperimentConfig, size) -> dict:
    """Per-method thresholds for the outlier stress test.

    The doubly robust run opens the unit side completely (every row becomes
    a unit neighbor) and relies on exact time duplicates to cancel the bias;
    the vanilla runs keep the plug-in threshold, which for the outlier row
    means unit-NN falls back to its observed value.
    """
    n_units, n_times = size
    sigma = float(config.generator.get("sigma", 0.5))
    p = float(config.generator.get("p", 1.0))
    eta = theory_eta(n_units, n_times, p, sigma_sq=sigma ** 2,
                     c=config.tuning.get("plugin_constant", 1.0),
                     delta=config.tuning.get("delta", 0.05))
    etas = {m: eta for m in config.methods}
    if "dr" in etas:
        etas["dr"] = (1e18, eta[1])
    return etas


def _rep_task(args):
    config, size, rep, etas = args
    return run_replication(config, size, rep, etas)


def _run_reps(config: ExperimentConfig, size, etas):
    tasks = [(config, size, rep, etas) for rep in range(config.replications)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_rep_task, tasks, chunksize=8))
    else:
        chunks = [_rep_task(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def fit_loglog_slope(medians: dict) -> tuple[float, float]:
    """OLS slope (and its standard error) of log median error vs log N."""
    xs = np.log([float(n) for n in medians])
    ys = np.log([max(float(v), 1e-300) for v in medians.values()])
    n = xs.size
    xbar, ybar = xs.mean(), ys.mean()
    sxx = float(np.sum((xs - xbar) ** 2))
    slope = float(np.sum((xs - xbar) * (ys - ybar)) / sxx)
    resid = ys - (ybar + slope * (xs - xbar))
    se = float("nan")
    if n > 2:
        se = math.sqrt(float(np.sum(resid ** 2)) / (n - 2) / sxx)
    return slope, se


def _sq_errors(rows, method, size=None):
    out = [
        r.sq_error for r in rows
        if r.method == method and r.sq_error is not None
        and (size is None or (r.N, r.T) == size)
    ]
    return np.array(out)


def summarize(config: ExperimentConfig, rows) -> dict:
    """Per-method summary: size-wise error stats, slope fit, coverage, widths.

    Empirical coverage is reported next to the nominal 1 - alpha target.
    """
    summary = {"scenario": config.scenario, "sizes": [list(s) for s in config.sizes],
               "alpha": config.alpha, "nominal_coverage": 1.0 - config.alpha,
               "per_method": {}, "flags": []}
    for method in config.methods:
        entry = {"by_size": {}, "slope": None, "slope_se": None,
                 "coverage": None, "mean_width": None}
        medians = {}
        for size in config.sizes:
            errs = _sq_errors(rows, method, size)
            if errs.size == 0:
                continue
            q25, q75 = np.quantile(errs, [0.25, 0.75])
            entry["by_size"][str(size[0])] = {
                "median": float(np.median(errs)),
                "mean": float(errs.mean()),
                "iqr": float(q75 - q25),
            }
            medians[size[0]] = float(np.median(errs))
        if len(medians) >= 2:
            slope, se = fit_loglog_slope(medians)
            entry["slope"], entry["slope_se"] = slope, se
        elif config.scenario == "rate_sweep":
            summary["flags"].append("summary_incomplete")
        covered = [r.ci_covered for r in rows if r.method == method and r.ci_covered is not None]
        widths = [r.ci_width for r in rows if r.method == method and r.ci_width is not None]
        if covered:
            entry["coverage"] = float(np.mean(covered))
        if widths:
            entry["mean_width"] = float(np.mean(widths))
            entry["median_width"] = float(np.median(widths))
            entry["median_width_by_size"] = {
                str(size[0]): float(np.median([
                    r.ci_width for r in rows
                    if r.method == method and r.ci_width is not None
                    and (r.N, r.T) == size
                ] or [np.nan]))
                for size in config.sizes
            }
        summary["per_method"][method] = entry
    return summary


def run_sweep(config: ExperimentConfig):
    """Rate sweep (or robustness stress test) over the configured sizes."""
    rows = []
    for size in config.sizes:
        if config.scenario == "robustness":
            etas = _robustness_etas(config, size)
        else:
            pilot_seed = mix_seed(config.base_seed, size[0], size[1], "pilot")
            if config.tuning.get("mode", "validation") == "validation":
                pilot = instance_from_dict(config.generator, size[0], size[1], pilot_seed)
            else:
                pilot = None
            etas = _tuned_etas(config, size, pilot)
        rows.extend(_run_reps(config, size, etas))
    rows = sort_rows(rows)
    return rows, summarize(config, rows)


def coverage_experiment(config: ExperimentConfig):
    """Interval coverage/width study at the configured sizes."""
    rows = []
    for size in config.sizes:
        pilot = None
        if config.tuning.get("mode", "validation") == "validation":
            pilot_seed = mix_seed(config.base_seed, size[0], size[1], "pilot")
            pilot = instance_from_dict(config.generator, size[0], size[1], pilot_seed)
        etas = _tuned_etas(config, size, pilot)
        rows.extend(_run_reps(config, size, etas))
    rows = sort_rows(rows)
    return rows, summarize(config, rows)


def tensor_demo_experiment(config: ExperimentConfig):
    """Triply robust vs. single-mode NN on rank-1 tensors with duplicated,
    heterogeneous factors; all estimators share all-inclusive neighbor sets
    so the comparison isolates the inclusion-exclusion bias cancellation."""
    opts = config.tensor
    n = int(opts.get("n_per_mode", 50))
    atoms = np.asarray(opts.get("atoms", [1.0, 1.1, 1.25, 1.7, 2.4]), dtype=float)
    sigma = float(opts.get("sigma", config.generator.get("sigma", 0.5)))
    methods = tuple(opts.get("methods", ("tr", "unit")))
    rows = []
    for rep in range(config.replications):
        seed = mix_seed(config.base_seed, n, rep, "tensor")
        rng = rng_for(seed, "factors")
        u, v, w = (atoms[rng.integers(0, atoms.size, size=n)] for _ in range(3))
        theta = u[:, None, None] * v[None, :, None] * w[None, None, :]
        noise = gen_noise((n, n, n), sigma, seed=mix_seed(seed, "noise"))
        tensor = ObservationTensor(theta + noise, np.ones((n, n, n), dtype=np.uint8))
        t_rng = rng_for(seed, "target")
        target = TargetCell(*(int(t_rng.integers(0, n)) for _ in range(3)))
        truth = float(theta[target.unit, target.time, target.intervention])
        big = float(np.max(theta) ** 2 * 10 + 10)
        nbrs = tensor_neighbors(tensor, target, (big, big, big))
        for method in methods:
            if method == "tr":
                est = estimate_tr_nn(tensor, nbrs)
            else:
                est = estimate_tensor_vanilla(tensor, nbrs, method)
            rows.append(ResultRow(
                scenario="tensor_demo", N=n, T=n, p=1.0, sigma=sigma,
                method=method, replication=rep,
                target_i=target.unit, target_t=target.time,
                sq_error=(est.value - truth) ** 2,
                ci_covered=None, ci_width=None,
                n_unit=est.n_unit_used, n_time=est.n_time_used,
                eta1=big, eta2=big,
                wall_ms=0.0,
            ))
    rows = sort_rows(rows)
    cfg = ExperimentConfig(
        scenario="tensor_demo", sizes=[(n, n)], replications=config.replications,
        methods=methods, base_seed=config.base_seed,
    )
    return rows, summarize(cfg, rows)


def run_scenario(config: ExperimentConfig):
    if config.scenario in ("rate_sweep", "robustness"):
        return run_sweep(config)
    if config.scenario in ("coverage", "improvement"):
        return coverage_experiment(config)
    return tensor_demo_experiment(config)


def sort_rows(rows):
    return sorted(rows, key=lambda r: (r.N, r.T, r.method, r.replication))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        return repr(value)
    return str(int(value)) if isinstance(value, np.integer) else str(value)


def write_results_csv(rows, path, include_timing: bool = False) -> None:
    """Fixed-schema CSV, rows ordered by (size, method, replication).

    An existing file is replaced.  Wall times are volatile, so the column
    is zeroed unless ``include_timing`` is set; reruns of the same config
    are then byte-identical at any worker count.
    """
    lines = [",".join(RESULT_FIELDS)]
    for row in sort_rows(rows):
        d = asdict(row)
        if not include_timing:
            d["wall_ms"] = 0.0
        lines.append(",".join(_format_cell(d[f]) for f in RESULT_FIELDS))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_results_csv(path):
    """Inverse of :func:`write_results_csv` (used by tests and scripts)."""
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    if tuple(header) != RESULT_FIELDS:
        raise ConfigError(f"unexpected header {header}")
    out = []
    for line in text[1:]:
        cells = line.split(",")
        d = dict(zip(RESULT_FIELDS, cells))
        out.append(ResultRow(
            scenario=d["scenario"], N=int(d["N"]), T=int(d["T"]),
            p=float(d["p"]), sigma=float(d["sigma"]), method=d["method"],
            replication=int(d["replication"]),
            target_i=int(d["target_i"]), target_t=int(d["target_t"]),
            sq_error=float(d["sq_error"]) if d["sq_error"] else None,
            ci_covered={"1": True, "0": False}.get(d["ci_covered"]),
            ci_width=float(d["ci_width"]) if d["ci_width"] else None,
            n_unit=int(d["n_unit"]), n_time=int(d["n_time"]),
            eta1=float(d["eta1"]), eta2=float(d["eta2"]),
            wall_ms=float(d["wall_ms"]),
        ))
    return out
