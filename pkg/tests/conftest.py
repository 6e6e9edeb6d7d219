import json
from pathlib import Path

import numpy as np
import pytest

from pathcalc import dyadic_sequence, faber_schauder_path, step_path

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fs_oracle():
    with open(FIXTURES / "fs_qv_oracle.json") as fh:
        data = json.load(fh)
    data["q_at_1"] = {int(k): v for k, v in data["q_at_1"].items()}
    return data


@pytest.fixture(scope="session")
def fs14():
    return faber_schauder_path(14, seed=42)


@pytest.fixture(scope="session")
def fs12_jump():
    return faber_schauder_path(12, seed=42) + step_path({1 / np.pi: 1.0})


@pytest.fixture(scope="session")
def seq14():
    return dyadic_sequence(1.0, 14, 10)


@pytest.fixture(scope="session")
def step_fixtures():
    return {
        "single": step_path({0.5: 2.0}),
        "negative": step_path({0.5: -1.5}),
        "three": step_path({0.3: 1.0, 0.5: -2.0, 1 / np.pi: 0.7}, x0=0.4),
        "dyadic": step_path({0.25: 1.0, 0.625: 0.5, 0.875: -0.25}),
        "irrational": step_path({1 / np.pi: 1.0, np.sqrt(2) / 2: -0.5}, x0=-1.0),
    }
