"""Ground-truth instance generators for tests and experiments.

Instances follow the latent factor recipe: factors per row and per column,
a mean surface theta = f(u, v), i.i.d. bounded noise with variance sigma^2,
and an independent Bernoulli(p) observation mask.  Factors, noise and mask
draw from disjoint sub-seeded streams so that changing one knob leaves the
other draws bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .panel import ObservationPanel
from .seeding import rng_for

DEFAULT_BOX_HALFWIDTH = (2.0 / 3.0) ** (1.0 / 3.0)

# Named nonlinear surfaces with coercive distance profiles; the bilinear
# kind is the exact inner product.
NONLINEAR_CATALOG = {
    # coercivity exponent 2 on bounded factor boxes
    "shifted-sigmoid": lambda U, V: 5.0 * np.tanh(U @ V.T),
    # inner product plus a rank-breaking additive part; exponent 2
    "additive-quadratic": lambda U, V: U @ V.T
    + 0.1 * (np.sum(U * U, axis=1)[:, None] - np.sum(V * V, axis=1)[None, :]),
}


@dataclass
class FactorConfig:
    kind: str = "discrete"  # discrete | continuous
    d: int = 2
    m_unit: int = 5
    m_time: int = 5
    box_halfwidth: float = DEFAULT_BOX_HALFWIDTH
    seed: int | None = None  # overrides the instance-derived factor streams

    def __post_init__(self):
        if self.kind not in ("discrete", "continuous"):
            raise ConfigError(f"unknown factor kind {self.kind!r}")
        if self.d < 1:
            raise ConfigError("factor dimension must be positive")
        if self.kind == "discrete" and (self.m_unit < 1 or self.m_time < 1):
            raise ConfigError("discrete support sizes must be >= 1")
        if self.kind == "continuous" and self.box_halfwidth <= 0:
            raise ConfigError("box halfwidth must be positive")


@dataclass
class SurfaceConfig:
    kind: str = "bilinear"  # bilinear | nonlinear
    nonlinear_fn: str = "shifted-sigmoid"

    def __post_init__(self):
        if self.kind not in ("bilinear", "nonlinear"):
            raise ConfigError(f"unknown surface kind {self.kind!r}")
        if self.kind == "nonlinear" and self.nonlinear_fn not in NONLINEAR_CATALOG:
            raise ConfigError(
                f"nonlinear_fn must be one of {sorted(NONLINEAR_CATALOG)}"
            )


@dataclass
class SyntheticInstance:
    theta: np.ndarray
    unit_factors: np.ndarray
    time_factors: np.ndarray
    noise_sigma: float
    obs_prob: float
    panel: ObservationPanel
    seed: int


def gen_discrete_factors(n: int, m: int, d: int, seed: int) -> np.ndarray:
    """n i.i.d. uniform draws from a seeded m-point subset of {-1, 1}^d."""
    if m > 2 ** d:
        raise ConfigError(f"support size {m} exceeds 2^{d}")
    rng = rng_for(seed, "discrete-support")
    if d <= 20:
        codes = rng.choice(2 ** d, size=m, replace=False)
    else:
        seen: set[int] = set()
        while len(seen) < m:
            seen.add(int(rng.integers(0, 2 ** d)))
        codes = np.array(sorted(seen))
    support = np.array(
        [[1.0 if (int(c) >> k) & 1 else -1.0 for k in range(d)] for c in codes]
    )
    draws = rng_for(seed, "discrete-draws").integers(0, m, size=n)
    return support[draws]


def gen_continuous_factors(
    n: int, d: int, c: float = DEFAULT_BOX_HALFWIDTH, seed: int = 0
) -> np.ndarray:
    """n i.i.d. uniform draws from the box [-c, c]^d."""
    if c <= 0:
        raise ConfigError("box halfwidth must be positive")
    return rng_for(seed, "continuous-draws").uniform(-c, c, size=(n, d))


def build_theta(U: np.ndarray, V: np.ndarray, surface: SurfaceConfig) -> np.ndarray:
    """Mean matrix theta[i, t] = f(u_i, v_t)."""
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    if U.shape[1] != V.shape[1]:
        raise ConfigError(
            f"factor dims differ: {U.shape[1]} vs {V.shape[1]}"
        )
    if surface.kind == "bilinear":
        return U @ V.T
    return NONLINEAR_CATALOG[surface.nonlinear_fn](U, V)


def _truncated_gaussian_scale(sigma: float, bound: float) -> float:
    """Base scale s so that N(0, s^2) truncated at +-bound has variance sigma^2."""
    s = sigma
    for _ in range(60):
        b = bound / s
        if b > 12:
            factor = 1.0
        else:
            phi = math.exp(-b * b / 2.0) / math.sqrt(2.0 * math.pi)
            cdf_mass = math.erf(b / math.sqrt(2.0))
            factor = 1.0 - 2.0 * b * phi / cdf_mass
        new_s = sigma / math.sqrt(factor)
        if abs(new_s - s) < 1e-12 * sigma:
            return new_s
        s = new_s
    return s


def gen_noise(
    shape,
    sigma: float,
    kind: str = "truncated_gaussian",
    bound: float | None = None,
    seed: int = 0,
) -> np.ndarray:
    """i.i.d. mean-zero noise with variance sigma^2.

    ``truncated_gaussian`` rescales so the post-truncation variance is
    sigma^2 and respects the hard bound (default 5 sigma); ``uniform`` uses
    U[-a, a] with a = sigma * sqrt(3) and requires bound >= a.
    """
    if sigma < 0:
        raise ConfigError("sigma must be nonnegative")
    if sigma == 0:
        return np.zeros(shape)
    rng = rng_for(seed, "noise")
    if kind == "gaussian":
        return rng.normal(0.0, sigma, size=shape)
    if kind == "uniform":
        a = sigma * math.sqrt(3.0)
        if bound is not None and bound < a:
            raise ConfigError(
                f"uniform noise with variance {sigma**2} needs bound >= {a}"
            )
        return rng.uniform(-a, a, size=shape)
    if kind == "truncated_gaussian":
        b = 5.0 * sigma if bound is None else float(bound)
        if b <= sigma:
            raise ConfigError("truncation bound too tight for requested variance")
        scale = _truncated_gaussian_scale(sigma, b)
        out = rng.normal(0.0, scale, size=shape)
        bad = np.abs(out) > b
        while bad.any():
            out[bad] = rng.normal(0.0, scale, size=int(bad.sum()))
            bad = np.abs(out) > b
        return out
    raise ConfigError(f"unknown noise kind {kind!r}")


def gen_mask(shape, p: float, seed: int = 0) -> np.ndarray:
    """i.i.d. Bernoulli(p) observation mask."""
    if not 0 < p <= 1:
        raise ConfigError(f"p must be in (0, 1], got {p}")
    return (rng_for(seed, "mask").random(shape) < p).astype(np.uint8)


def gen_instance(
    n_units: int,
    n_times: int,
    factor_cfg: FactorConfig,
    surface_cfg: SurfaceConfig,
    sigma: float,
    noise_kind: str = "truncated_gaussian",
    p: float = 1.0,
    seed: int = 0,
) -> SyntheticInstance:
    """Wire factors, surface, noise and mask from disjoint sub-streams."""
    factor_base = seed if factor_cfg.seed is None else factor_cfg.seed
    u_seed = rng_seed(factor_base, "unit-factors")
    v_seed = rng_seed(factor_base, "time-factors")
    if factor_cfg.kind == "discrete":
        U = gen_discrete_factors(n_units, factor_cfg.m_unit, factor_cfg.d, seed=u_seed)
        V = gen_discrete_factors(n_times, factor_cfg.m_time, factor_cfg.d, seed=v_seed)
    else:
        U = gen_continuous_factors(n_units, factor_cfg.d, factor_cfg.box_halfwidth,
                                   seed=u_seed)
        V = gen_continuous_factors(n_times, factor_cfg.d, factor_cfg.box_halfwidth,
                                   seed=v_seed)
    theta = build_theta(U, V, surface_cfg)
    noise = gen_noise((n_units, n_times), sigma, noise_kind,
                      seed=rng_seed(seed, "noise"))
    mask = gen_mask((n_units, n_times), p, seed=rng_seed(seed, "mask"))
    outcomes = np.where(mask == 1, theta + noise, np.nan)
    panel = ObservationPanel(outcomes, mask)
    return SyntheticInstance(
        theta=theta, unit_factors=U, time_factors=V,
        noise_sigma=sigma, obs_prob=p, panel=panel, seed=seed,
    )


def rng_seed(seed: int, tag: str) -> int:
    """Derived integer seed for one generation stream."""
    from .seeding import mix_seed

    return mix_seed(seed, tag)


def instance_from_dict(cfg: dict, n_units=None, n_times=None, seed=None) -> SyntheticInstance:
    """Build an instance from a flat config mapping.

    Recognized keys: n, t, factor.{kind,d,m_unit,m_time,halfwidth},
    surface.{kind,fn}, sigma, noise.kind, p, seed.  ``n_units``/``n_times``/
    ``seed`` arguments override the config.
    """
    factor = cfg.get("factor", {})
    surface = cfg.get("surface", {})
    noise = cfg.get("noise", {})
    fc = FactorConfig(
        kind=factor.get("kind", "discrete"),
        d=int(factor.get("d", 2)),
        m_unit=int(factor.get("m_unit", 5)),
        m_time=int(factor.get("m_time", 5)),
        box_halfwidth=float(factor.get("halfwidth", DEFAULT_BOX_HALFWIDTH)),
    )
    sc = SurfaceConfig(
        kind=surface.get("kind", "bilinear"),
        nonlinear_fn=surface.get("fn", "shifted-sigmoid"),
    )
    return gen_instance(
        n_units=int(cfg["n"] if n_units is None else n_units),
        n_times=int(cfg["t"] if n_times is None else n_times),
        factor_cfg=fc,
        surface_cfg=sc,
        sigma=float(cfg.get("sigma", 0.0)),
        noise_kind=noise.get("kind", "truncated_gaussian"),
        p=float(cfg.get("p", 1.0)),
        seed=int(cfg.get("seed", 0) if seed is None else seed),
    )
