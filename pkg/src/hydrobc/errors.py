"""Exception hierarchy.

Every error carries a short ``code`` that the CLI prints so failures can be
grepped for in logs.
"""

from __future__ import annotations


class HydroBCError(Exception):
    code = "E_HYDROBC"


class StructuralError(HydroBCError, ValueError):
    """Series or cell sets whose shapes or metadata do not line up."""

    code = "E_STRUCTURE"


class CalendarMismatchError(StructuralError):
    code = "E_CALENDAR"


class FitError(HydroBCError, ValueError):
    """A distribution could not be fitted to the data supplied."""

    code = "E_FIT"

    def __init__(self, message: str, month: int | None = None):
        if month is not None:
            message = f"month {month:02d}: {message}"
        super().__init__(message)
        self.month = month


class ConfigError(HydroBCError, ValueError):
    code = "E_CONFIG"


class ZeroVarianceError(HydroBCError, ValueError):
    code = "E_ZERO_VARIANCE"
