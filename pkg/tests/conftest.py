from pathlib import Path

import pytest

from thaguard import sample_data_dir
from thaguard.planner import load_countermeasures
from thaguard.scheme import load_scheme
from thaguard.spectrum import default_grid


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture(scope="session")
def sample_dir():
    return Path(str(sample_data_dir()))


@pytest.fixture(scope="session")
def alice(sample_dir, grid):
    return load_scheme(sample_dir / "alice.json", grid=grid)


@pytest.fixture(scope="session")
def bob(sample_dir, grid):
    return load_scheme(sample_dir / "bob.json", grid=grid)


@pytest.fixture(scope="session")
def countermeasures(sample_dir, grid):
    return load_countermeasures(sample_dir / "countermeasures.json", grid)
