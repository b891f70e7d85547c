import os

# settings are read once at import; keep test output free of progress bars
os.environ.setdefault("HLAB_PROGRESS", "0")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from hlab import calculus  # noqa: E402
from hlab.space import build_torus  # noqa: E402


@pytest.fixture(scope="session")
def torus32():
    return build_torus(32, 1)


@pytest.fixture(scope="session")
def torus64():
    return build_torus(64, 1)


@pytest.fixture(scope="session")
def dec32(torus32):
    return calculus.decompose(calculus.build_laplacian(torus32))


@pytest.fixture(scope="session")
def dec64(torus64):
    return calculus.decompose(calculus.build_laplacian(torus64))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
