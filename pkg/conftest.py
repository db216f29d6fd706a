"""
Shared pytest fixtures: bundled scenarios and an isolated output root.
"""

import sys
from pathlib import Path

import pytest

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from leo_offload.core.config import settings  # noqa: E402
from leo_offload.models.scenario import load_scenario_file  # noqa: E402
from leo_offload.utils.scenario_presets import SCENARIO_DIR  # noqa: E402


@pytest.fixture(scope="session")
def table2_cfg():
    return load_scenario_file(SCENARIO_DIR / "table2.scenario")


@pytest.fixture(scope="session")
def tiny_cfg():
    return load_scenario_file(SCENARIO_DIR / "tiny.scenario")


@pytest.fixture(scope="session")
def medium_cfg():
    return load_scenario_file(SCENARIO_DIR / "medium.scenario")


@pytest.fixture
def single_task_cfg(tiny_cfg):
    """One 400 MB task and the tiny constellation."""
    return tiny_cfg.with_overrides(num_tasks=1, task_sizes=[400.0])


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    """Redirect default command outputs into a temporary directory."""
    monkeypatch.setattr(settings, "output_root", tmp_path)
    return tmp_path
