import json
from pathlib import Path

import numpy as np
import pytest

from finslerlab.conformal import load_conformal
from finslerlab.metrics import load_metric

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "finslerlab" / "fixtures"
DATA = Path(__file__).resolve().parent / "data"


def fixture_metric(name):
    return load_metric(FIXTURES / f"{name}.json")


def fixture_conformal(name):
    return load_conformal(FIXTURES / f"{name}.json")


def fixture_dict(name):
    return json.loads((FIXTURES / f"{name}.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
