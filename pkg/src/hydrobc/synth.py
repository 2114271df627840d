"""Synthetic observation / climate-model pairs with known biases.

Observed precipitation is a month-dependent mixture of dry days and Gamma
wet-day amounts; observed temperature is Normal per month. The simulated
series share the observations' day-to-day sequence through a Gaussian
copula (``correlation``) and differ from them by controllable biases:
a temperature shift and variance factor, extra drizzle days, rescaled
wet-day Gammas and an inflated upper tail above the wet-day 90th
percentile. Latent Gaussian series carry AR(1) ``persistence`` so wet and
dry spells and warm and cold spells cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import special

from .errors import ConfigError
from .timeseries import Calendar, DailySeries, DateStamp, Variable, month_length, to_ordinal


@dataclass(frozen=True)
class MonthClimate:
    wet_shape: float
    wet_scale: float  # mm/day
    dry_fraction: float
    temp_mean: float  # degC
    temp_sd: float


@dataclass(frozen=True)
class SimBias:
    temp_shift: float = 0.0
    temp_var_factor: float = 1.0
    drizzle_surplus: float = 0.0  # fraction of all days turned from dry to drizzle
    drizzle_max: float = 0.5  # mm/day
    wet_scale_factor: float = 1.0
    wet_shape_factor: float = 1.0
    tail_inflation: float = 1.0  # stretch of wet amounts above the wet-day 90th percentile


@dataclass(frozen=True)
class SynthSpec:
    months: tuple[MonthClimate, ...]
    bias: SimBias = field(default_factory=SimBias)
    calendar: Calendar = Calendar.GREGORIAN
    start: DateStamp = DateStamp(1981, 1, 1)
    years: int = 20
    correlation: float = 0.8
    persistence: float = 0.3

    def validate(self) -> "SynthSpec":
        if len(self.months) != 12:
            raise ConfigError("a synthetic spec needs 12 monthly climates")
        for i, mc in enumerate(self.months, start=1):
            if not (mc.wet_shape > 0 and mc.wet_scale > 0 and mc.temp_sd > 0):
                raise ConfigError(f"month {i}: shape, scale and sd must be positive")
            if not 0 <= mc.dry_fraction < 1:
                raise ConfigError(f"month {i}: dry fraction must lie in [0, 1)")
        b = self.bias
        if not (b.temp_var_factor > 0 and b.wet_scale_factor > 0 and b.wet_shape_factor > 0):
            raise ConfigError("bias factors must be positive")
        if b.tail_inflation < 0 or not 0 <= b.drizzle_surplus < 1 or b.drizzle_max <= 0:
            raise ConfigError("invalid drizzle or tail bias")
        if not -1 <= self.correlation <= 1 or not -1 < self.persistence < 1:
            raise ConfigError("correlation must lie in [-1, 1] and persistence in (-1, 1)")
        if self.years < 1:
            raise ConfigError("need at least one year")
        return self

    def n_days(self) -> int:
        s = self.start
        last_day = month_length(self.calendar, s.year + self.years, s.month)
        end = DateStamp(s.year + self.years, s.month, min(s.day, last_day))
        return to_ordinal(end, self.calendar) - to_ordinal(s, self.calendar)


def uk_like_spec(precip_scale: float = 1.0, temp_mean: float = 9.0, temp_amplitude: float = 6.0,
                 wet_shape: float = 0.8, **kwargs) -> SynthSpec:
    """Twelve monthly climates resembling a lowland UK catchment.

    Annual precipitation is about 800 mm for ``precip_scale=1`` with a
    wetter winter; temperature follows a sinusoid peaking in late July.
    """
    months = []
    for m in range(1, 13):
        phase = math.cos(2 * math.pi * (m - 1) / 12)  # +1 in January
        dry = 0.50 - 0.06 * phase
        scale = precip_scale * (5.0 + 1.2 * phase)
        t = temp_mean - temp_amplitude * math.cos(2 * math.pi * (m - 1.2) / 12)
        months.append(MonthClimate(wet_shape, scale, dry, t, 2.5 - 0.5 * phase))
    return SynthSpec(tuple(months), **kwargs).validate()


@dataclass(frozen=True)
class SynthPair:
    obs_precip: DailySeries
    obs_temp: DailySeries
    sim_precip: DailySeries
    sim_temp: DailySeries


def _ar1(rng: np.random.Generator, n: int, phi: float) -> np.ndarray:
    e = rng.standard_normal(n)
    z = np.empty(n)
    z[0] = e[0]
    c = math.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        z[t] = phi * z[t - 1] + c * e[t]
    return z


def _norm_cdf(z: np.ndarray) -> np.ndarray:
    return special.ndtr(z)


def _precip_from_uniform(u: np.ndarray, dry: np.ndarray, shape: np.ndarray, scale: np.ndarray,
                         surplus: float = 0.0, drizzle_max: float = 0.5,
                         tail: float = 1.0) -> np.ndarray:
    """Dry/drizzle/Gamma mixture quantile function evaluated at ``u``."""
    out = np.zeros_like(u)
    dry_sim = np.maximum(dry - surplus, 0.0)
    drizzle = (u >= dry_sim) & (u < dry)
    if surplus > 0:
        frac = (u[drizzle] - dry_sim[drizzle]) / np.maximum(dry[drizzle] - dry_sim[drizzle], 1e-12)
        out[drizzle] = 0.01 + (drizzle_max - 0.01) * frac
    wet = u >= dry
    v = np.clip((u[wet] - dry[wet]) / (1.0 - dry[wet]), 1e-12, 1.0 - 1e-12)
    amounts = special.gammaincinv(shape[wet], v) * scale[wet]
    if tail != 1.0:
        q90 = special.gammaincinv(shape[wet], 0.9) * scale[wet]
        above = amounts > q90
        amounts[above] = q90[above] + tail * (amounts[above] - q90[above])
    out[wet] = amounts
    return out


def _climate_arrays(spec: SynthSpec, n: int):
    axis = DailySeries(Variable.TEMP, spec.calendar, spec.start, np.zeros(n))
    mi = axis.months - 1
    mc = spec.months
    return tuple(np.array([getattr(m, f) for m in mc])[mi]
                 for f in ("dry_fraction", "wet_shape", "wet_scale", "temp_mean", "temp_sd"))


def _render_sim(spec: SynthSpec, bias: SimBias, arrays, zp: np.ndarray, zt: np.ndarray):
    dry, shape, scale, tmean, tsd = arrays
    p = _precip_from_uniform(_norm_cdf(zp), dry, shape * bias.wet_shape_factor,
                             scale * bias.wet_scale_factor, bias.drizzle_surplus, bias.drizzle_max,
                             bias.tail_inflation)
    t = tmean + bias.temp_shift + tsd * math.sqrt(bias.temp_var_factor) * zt
    return (DailySeries(Variable.PRECIP, spec.calendar, spec.start, p),
            DailySeries(Variable.TEMP, spec.calendar, spec.start, t))


def _coupled(rng: np.random.Generator, z_obs: np.ndarray, rho: float, phi: float) -> np.ndarray:
    return rho * z_obs + math.sqrt(max(1.0 - rho * rho, 0.0)) * _ar1(rng, z_obs.size, phi)


def synth_generate(spec: SynthSpec, seed: int) -> SynthPair:
    """Draw one reproducible observed/simulated pair from ``spec``."""
    spec.validate()
    n = spec.n_days()
    rng = np.random.default_rng(seed)
    rho, phi = spec.correlation, spec.persistence
    zp_obs = _ar1(rng, n, phi)
    zp_sim = _coupled(rng, zp_obs, rho, phi)
    zt_obs = _ar1(rng, n, 0.7)
    zt_sim = _coupled(rng, zt_obs, rho, 0.7)

    arrays = _climate_arrays(spec, n)
    obs_p, obs_t = _render_sim(spec, SimBias(), arrays, zp_obs, zt_obs)
    sim_p, sim_t = _render_sim(spec, spec.bias, arrays, zp_sim, zt_sim)
    return SynthPair(obs_p, obs_t, sim_p, sim_t)


def synth_ensemble(spec: SynthSpec, biases: Sequence[SimBias], seed: int):
    """One observed record and one simulated pair per bias.

    Every member is coupled to the observations with ``spec.correlation``
    but carries its own independent noise. Returns
    ``(obs_precip, obs_temp, [(sim_precip, sim_temp), ...])``.
    """
    spec.validate()
    n = spec.n_days()
    seq = np.random.SeedSequence(seed)
    obs_seq, *member_seqs = seq.spawn(len(biases) + 1)
    rng = np.random.default_rng(obs_seq)
    rho, phi = spec.correlation, spec.persistence
    zp_obs = _ar1(rng, n, phi)
    zt_obs = _ar1(rng, n, 0.7)
    arrays = _climate_arrays(spec, n)
    obs_p, obs_t = _render_sim(spec, SimBias(), arrays, zp_obs, zt_obs)
    members = []
    for bias, mseq in zip(biases, member_seqs):
        mrng = np.random.default_rng(mseq)
        members.append(_render_sim(spec, bias, arrays, _coupled(mrng, zp_obs, rho, phi),
                                   _coupled(mrng, zt_obs, rho, 0.7)))
    return obs_p, obs_t, members


def random_bias(rng: np.random.Generator) -> SimBias:
    """Heterogeneous model biases of the size seen in regional climate models."""
    return SimBias(
        temp_shift=float(rng.uniform(-1.5, 1.5)),
        temp_var_factor=float(rng.uniform(0.7, 1.4)),
        drizzle_surplus=float(rng.uniform(0.0, 0.25)),
        wet_scale_factor=float(rng.uniform(0.6, 1.5)),
        wet_shape_factor=float(rng.uniform(0.8, 1.25)),
        tail_inflation=float(rng.uniform(1.0, 1.6)),
    )


def with_bias(spec: SynthSpec, bias: SimBias) -> SynthSpec:
    return replace(spec, bias=bias)


__all__ = ["MonthClimate", "SimBias", "SynthSpec", "SynthPair", "uk_like_spec", "synth_generate",
           "synth_ensemble", "random_bias", "with_bias"]
