"""Pytest wiring: doctests expect NumPy<2 scalar reprs (e.g. ``1.5`` not ``np.float64(1.5)``)."""

import numpy as np
import pytest
from _pytest.doctest import DoctestItem


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    if isinstance(item, DoctestItem) and int(np.__version__.split(".")[0]) >= 2:
        saved = np.get_printoptions()
        np.set_printoptions(legacy="1.25")
        try:
            yield
        finally:
            np.set_printoptions(**saved)
    else:
        yield
