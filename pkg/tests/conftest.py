import os

import numpy as np
import pytest
from hypothesis import settings

from symptransfer.core import Dataset, FeatureName, FeatureSpace

settings.register_profile("default", deadline=None, print_blob=True)
settings.register_profile("ci", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    if call.when == "call" or failed:
        previous = _CRITERIA.get(number, (title, "PASS"))[1]
        status = "FAIL" if failed or previous == "FAIL" else "PASS"
        _CRITERIA[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")


def make_dataset(names, X, y, w=None, provenance="test") -> Dataset:
    space = FeatureSpace(tuple(FeatureName.parse(n) for n in names))
    return Dataset(space, np.asarray(X, np.uint8), np.asarray(y, np.uint8), w, provenance)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
