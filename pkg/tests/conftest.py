import datetime as dt

import numpy as np
import pytest
from hypothesis import settings

from tarifflens.core import HOURS, validate_profile
from tarifflens.ingest import Dataset

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

DAY = dt.date(2014, 3, 1)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("] ")[1].split()[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(rows, day=DAY):
    """Dataset from {consumer: 24 values} for a single day."""
    return Dataset({(c, day): validate_profile(v) for c, v in rows.items()})


def padded(values, fill=1.0):
    out = np.full(HOURS, fill)
    out[: len(values)] = values
    return out
