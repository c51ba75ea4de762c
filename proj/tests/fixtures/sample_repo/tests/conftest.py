"""Shared pytest fixtures."""

import pytest

from core.registry import Registry
from data.loader import Loader


@pytest.fixture
def registry():
    return Registry()


@pytest.fixture
def loader(tmp_path):
    return Loader({"root": str(tmp_path)})


def write_sample(tmp_path, name, lines):
    """Write ``lines`` to ``tmp_path / name`` and return the path."""
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
