import pytest

from aslide.config import NetworkConfig


@pytest.fixture
def slide_cfg():
    return NetworkConfig(8, 64)


@pytest.fixture
def plus_cfg():
    return NetworkConfig(4, 128, "fully-async", "slide-plus")
