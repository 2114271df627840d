"""Temperature-based potential evapotranspiration (Oudin formula)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .timeseries import DailySeries, Variable

SOLAR_CONSTANT = 0.0820  # MJ m-2 min-1
LATENT_HEAT = 2.45  # MJ kg-1
WATER_DENSITY = 1000.0  # kg m-3


@dataclass(frozen=True)
class SiteGeometry:
    latitude: float  # radians

    def __post_init__(self) -> None:
        if not (math.isfinite(self.latitude) and abs(self.latitude) < math.pi / 2):
            raise ValueError(f"latitude must lie in (-pi/2, pi/2) radians, got {self.latitude}")

    @classmethod
    def from_degrees(cls, degrees: float) -> "SiteGeometry":
        return cls(math.radians(degrees))


def extraterrestrial_radiation(latitude, day_of_year, year_length=365):
    """Daily top-of-atmosphere radiation in MJ m-2 day-1.

    Uses the FAO-56 expressions for solar declination, inverse relative
    Earth-Sun distance and sunset hour angle; the hour-angle argument is
    clamped so polar day and polar night are handled.
    """
    if isinstance(latitude, SiteGeometry):
        latitude = latitude.latitude
    phi = np.asarray(latitude, dtype=np.float64)
    j = np.asarray(day_of_year, dtype=np.float64)
    ylen = np.asarray(year_length, dtype=np.float64)
    angle = 2.0 * np.pi * j / ylen
    decl = 0.409 * np.sin(angle - 1.39)
    dr = 1.0 + 0.033 * np.cos(angle)
    ws = np.arccos(np.clip(-np.tan(phi) * np.tan(decl), -1.0, 1.0))
    re = (24.0 * 60.0 / np.pi) * SOLAR_CONSTANT * dr * (
        ws * np.sin(phi) * np.sin(decl) + np.cos(phi) * np.cos(decl) * np.sin(ws))
    re = np.maximum(re, 0.0)
    return float(re) if re.ndim == 0 else re


def oudin_from_radiation(radiation, temperature):
    """PET in mm/day from radiation (MJ m-2 day-1) and mean temperature (degC)."""
    re = np.asarray(radiation, dtype=np.float64)
    t = np.asarray(temperature, dtype=np.float64)
    # Re / (lambda rho) is m/day; times 1000 for mm and (T + 5) / 100
    pet = np.where(t + 5.0 > 0.0,
                   re / (LATENT_HEAT * WATER_DENSITY) * (t + 5.0) / 100.0 * 1000.0, 0.0)
    pet = np.where(np.isnan(t), np.nan, pet)
    return float(pet) if pet.ndim == 0 else pet


def oudin_pet(temp: DailySeries, site: SiteGeometry | float) -> DailySeries:
    """Daily Oudin PET series for a site, using the series calendar for day-of-year."""
    if temp.variable is not Variable.TEMP:
        raise StructuralError(f"Oudin PET needs temperature, got {temp.variable.value}")
    if not isinstance(site, SiteGeometry):
        site = SiteGeometry(float(site))
    re = extraterrestrial_radiation(site.latitude, temp.day_of_year, temp.year_lengths)
    pet = oudin_from_radiation(re, temp.values)
    return DailySeries(Variable.PET, temp.calendar, temp.start, pet)
