from __future__ import annotations

import json
from importlib import resources

import pytest

from secpareto import kernels, load_graph


def _data(path: str) -> bytes:
    return resources.files("secpareto").joinpath(path).read_bytes()


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT compilation happens once here, outside any timed assertion.
    kernels.warmup()


@pytest.fixture(scope="session")
def toy_graph():
    return load_graph(_data("data/models/toy.json"))


@pytest.fixture(scope="session")
def ics_graph():
    return load_graph(_data("data/models/ics.json"))


@pytest.fixture(scope="session")
def toy_doc():
    return json.loads(_data("data/models/toy.json"))


@pytest.fixture(scope="session")
def bundle_bytes():
    return _data("data/intel/ics-attack-subset.json")


@pytest.fixture(scope="session")
def ics_binding():
    return json.loads(_data("data/intel/ics-binding.json"))
