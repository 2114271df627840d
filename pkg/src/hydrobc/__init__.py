"""Quantile-mapping bias correction and hydrological evaluation of daily climate-model output."""

__version__ = "0.1.0"
