import warnings

import numpy as np
import pytest

from loewnerqc.errors import NotConvergedWarning


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture(autouse=True)
def _quiet_convergence():
    with warnings.catch_warnings():
        warnings.simplefilter("error", NotConvergedWarning)
        yield
