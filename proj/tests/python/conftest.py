import importlib.util

import pytest


def pytest_configure(config):
    if importlib.util.find_spec("ebpr") is None:
        pytest.exit("ebpr extension not installed; run `pip install -e . --no-build-isolation`", returncode=77)
