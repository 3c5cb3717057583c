import copy
import sys
import json

import numpy as np
import pytest

from bendolp import kinematics
from bendolp.pipeline import example_scene_path
from bendolp.scene import load_scene


@pytest.fixture(scope="session")
def example_path():
    return example_scene_path()


@pytest.fixture(scope="session")
def example_doc(example_path):
    with open(example_path, encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def doc(example_doc):
    """A fresh, mutable copy of the example scene document."""
    return copy.deepcopy(example_doc)


@pytest.fixture(scope="session")
def example_scene(example_path):
    return load_scene(example_path)


@pytest.fixture(scope="session")
def arm():
    return kinematics.load_arm()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _minimal_doc(extra_tools=(), **brake):
    b = {"pbh": 800.0, "dbl": 600.0, "nl": 3, "lwa": 100.0, "uwa": 400.0}
    b.update(brake)
    tools = [
        {"name": "step_1", "pose": {"position": [500.0, -400.0, 100.0], "euler_xyz_deg": [180, 0, 0]}},
        {"name": "step_2A", "pose": {"position": [0.0, 700.0, 1050.0], "euler_xyz_deg": [-90, 0, 0]}},
        {"name": "step_2B", "pose": {"position": [20.0, 700.0, 1050.0], "euler_xyz_deg": [-90, 0, 0]}},
        {"name": "step_3", "pose": {"position": [-500.0, -400.0, 100.0], "euler_xyz_deg": [180, 0, 0]}},
    ]
    tools.extend(extra_tools)
    return {"brake": b, "tools": tools}


@pytest.fixture
def minimal_doc():
    """Factory for the smallest legal scene: pickup, one bend pair, palletize."""
    return _minimal_doc


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.format_results():
        terminalreporter.write_line(line)
