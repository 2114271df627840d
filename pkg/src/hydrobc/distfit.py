"""Special functions and parametric fits used by quantile mapping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import kernels
from .errors import FitError

logger = logging.getLogger(__name__)

MIN_WET_VALUES = 20
DEFAULT_OBS_DRY_THRESHOLD = 0.1

_STD_NORMAL = NormalDist()


# -- special functions -------------------------------------------------------

def ln_gamma(x: float) -> float:
    if not x > 0:
        raise ValueError(f"ln_gamma needs a positive argument, got {x}")
    return math.lgamma(x)


def regularized_gamma_p(a: float, x: float) -> float:
    """P(a, x), the Gamma(a, 1) CDF evaluated at ``x``."""
    if not a > 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    return kernels.gammainc_p(float(a), float(x))


def regularized_gamma_p_inv(a: float, p: float) -> float:
    if not a > 0:
        raise ValueError(f"shape must be positive, got {a}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly inside (0, 1), got {p}")
    return kernels.gammainc_p_inv(float(a), float(p))


def digamma(x: float) -> float:
    return kernels.digamma(float(x))


def trigamma(x: float) -> float:
    return kernels.trigamma(float(x))


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_inv_cdf(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly inside (0, 1), got {p}")
    return _STD_NORMAL.inv_cdf(p)


# -- distributions -------------------------------------------------------------

@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.shape) and math.isfinite(self.scale)
                and self.shape > 0 and self.scale > 0):
            raise ValueError(f"invalid Gamma parameters shape={self.shape}, scale={self.scale}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    def cdf(self, x):
        return kernels.gamma_cdf_array(np.asarray(x, dtype=np.float64), self.shape, self.scale)

    def ppf(self, u):
        return kernels.gamma_ppf_array(np.asarray(u, dtype=np.float64), self.shape, self.scale)

    def to_dict(self) -> dict:
        return {"shape": self.shape, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "GammaParams":
        return cls(float(d["shape"]), float(d["scale"]))


@dataclass(frozen=True)
class NormalParams:
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and math.isfinite(self.sd) and self.sd > 0):
            raise ValueError(f"invalid Normal parameters mean={self.mean}, sd={self.sd}")

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalParams":
        return cls(float(d["mean"]), float(d["sd"]))


def _clean(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    return v[~np.isnan(v)]


def gamma_shape_equation(shape: float, log_mean_gap: float) -> float:
    """Profile score ``ln k - digamma(k) - s``; zero at the MLE shape."""
    return math.log(shape) - kernels.digamma(shape) - log_mean_gap


def fit_gamma_mle(values, month: int | None = None, min_count: int = MIN_WET_VALUES) -> GammaParams:
    """Maximum-likelihood Gamma fit.

    Newton iterations on the profile score equation start from the
    Greenwood-Durand style closed-form approximation. If Newton does not
    converge in 100 steps the method-of-moments estimate is returned.

    Raises:
        FitError: fewer than ``min_count`` values, non-positive values, or a
            sample with no spread.
    """
    x = _clean(values)
    if x.size < min_count:
        raise FitError(f"need at least {min_count} positive values, got {x.size}", month)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise FitError("Gamma fitting requires strictly positive finite values", month)
    if np.ptp(x) == 0:
        raise FitError("all values are equal; Gamma fit is degenerate", month)
    m = float(x.mean())
    s = math.log(m) - float(np.log(x).mean())
    if not s > 0:
        raise FitError("sample has no log-spread; Gamma fit is degenerate", month)

    k = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(100):
        f = gamma_shape_equation(k, s)
        df = 1.0 / k - kernels.trigamma(k)
        step = f / df
        k_new = k - step
        if k_new <= 0:
            k_new = 0.5 * k
        if abs(k_new - k) <= 1e-12 * k:  # f loses digits to cancellation below this
            k = k_new
            break
        k = k_new
    else:
        logger.warning("Gamma MLE did not converge%s; using moments",
                       f" for month {month}" if month else "")
        var = float(x.var(ddof=1))
        k = m * m / var
    return GammaParams(k, m / k)


def fit_normal(values, month: int | None = None) -> NormalParams:
    x = _clean(values)
    if x.size < 2:
        raise FitError(f"need at least 2 values, got {x.size}", month)
    sd = float(x.std(ddof=1))
    if not sd > 0:
        raise FitError("zero variance; Normal fit is degenerate", month)
    return NormalParams(float(x.mean()), sd)


def empirical_quantile(values, p):
    """Linearly interpolated sample quantile at position ``1 + (n - 1) p``.

    Missing values are ignored. ``p`` may be a scalar or an array.
    """
    x = _clean(values)
    if x.size == 0:
        raise ValueError("empirical quantile of an empty sample")
    q = np.quantile(x, np.clip(p, 0.0, 1.0), method="linear")
    return float(q) if np.ndim(q) == 0 else q


@dataclass(frozen=True)
class WetDayModel:
    """Simulated wet-day threshold and the Gamma fitted above it."""

    sim_threshold: float
    obs_dry_fraction: float
    gamma: GammaParams

    def to_dict(self) -> dict:
        return {"sim_threshold": self.sim_threshold,
                "obs_dry_fraction": self.obs_dry_fraction,
                "gamma": self.gamma.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "WetDayModel":
        return cls(float(d["sim_threshold"]), float(d["obs_dry_fraction"]),
                   GammaParams.from_dict(d["gamma"]))


def wet_day_threshold(sim_values, obs_values,
                      obs_dry_threshold: float = DEFAULT_OBS_DRY_THRESHOLD) -> tuple[float, float]:
    """Return ``(sim_threshold, obs_dry_fraction)`` matching dry-day frequencies."""
    sim = _clean(sim_values)
    obs = _clean(obs_values)
    if sim.size == 0 or obs.size == 0:
        raise FitError("empty training sample")
    dry_fraction = float(np.mean(obs < obs_dry_threshold))
    return float(empirical_quantile(sim, dry_fraction)), dry_fraction


def sim_wet_values(sim_values, sim_threshold: float) -> np.ndarray:
    sim = _clean(sim_values)
    return sim[(sim >= sim_threshold) & (sim > 0)]


def obs_wet_values(obs_values, obs_dry_threshold: float) -> np.ndarray:
    obs = _clean(obs_values)
    return obs[(obs >= obs_dry_threshold) & (obs > 0)]


def fit_wet_day_model(sim_values, obs_values,
                      obs_dry_threshold: float = DEFAULT_OBS_DRY_THRESHOLD,
                      month: int | None = None) -> tuple[WetDayModel, GammaParams]:
    """Fit the simulated wet-day threshold and the wet-day Gammas on both sides.

    The simulated threshold is the simulated quantile at the observed dry
    fraction, so thresholding reproduces the observed number of dry days.
    """
    thr, dry_fraction = wet_day_threshold(sim_values, obs_values, obs_dry_threshold)
    sim_gamma = fit_gamma_mle(sim_wet_values(sim_values, thr), month=month)
    obs_gamma = fit_gamma_mle(obs_wet_values(obs_values, obs_dry_threshold), month=month)
    return WetDayModel(thr, dry_fraction, sim_gamma), obs_gamma
