from collections.abc import Callable
from functools import cache

import pytest

from ifscub.harness.config import Fractal, build_fractal
from ifscub.harness.gallery import gallery


@cache
def _build(name: str) -> Fractal:
    return build_fractal(gallery(name, allow_external=True))


@pytest.fixture(scope="session")
def gallery_fractal() -> Callable[[str], Fractal]:
    """Builds gallery entries once per test session."""
    return _build
