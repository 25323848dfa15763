import pathlib

import pytest

import lyacert


@pytest.fixture(scope="session")
def scenarios_dir():
    return pathlib.Path(lyacert.__file__).parent / "scenarios"
