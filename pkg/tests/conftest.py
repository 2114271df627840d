import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hydrobc.timeseries import Calendar, DailySeries, DateStamp, Variable

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def series(values, variable=Variable.PRECIP, calendar=Calendar.GREGORIAN, start=(1990, 1, 1)):
    return DailySeries(variable, calendar, DateStamp(*start), np.asarray(values, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
