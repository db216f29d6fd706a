"""
Bundled scenario presets.

Each preset names a scenario file under the repository's ``scenarios/``
directory. Command-line flags accept either a preset name or a path.

HOW TO ADD A PRESET:
1. Drop a new ``*.scenario`` YAML file into ``scenarios/``
2. Add a dictionary to SCENARIO_PRESETS below with name, file, description and category
"""

from pathlib import Path
from typing import Dict, List, Optional, Union

SCENARIO_DIR = Path(__file__).resolve().parents[2] / "scenarios"

SCENARIO_PRESETS = [
    {
        "name": "table2",
        "file": "table2.scenario",
        "description": "Reference parameters: 15 tasks, 25 satellites from 344 degrees",
        "category": "reference",
    },
    {
        "name": "tiny",
        "file": "tiny.scenario",
        "description": "3 tasks, 3 satellites; small enough for the exhaustive oracle",
        "category": "oracle",
    },
    {
        "name": "medium",
        "file": "medium.scenario",
        "description": "15 tasks, 10 satellites; baseline ordering runs",
        "category": "comparison",
    },
]


def get_presets(category: Optional[str] = None, limit: Optional[int] = None) -> List[Dict[str, str]]:
    """
    Get presets, optionally filtered by category

    Args:
        category: Filter by category (e.g. 'oracle', 'reference')
        limit: Maximum number of presets to return
    """
    presets = SCENARIO_PRESETS
    if category:
        presets = [p for p in presets if p.get("category") == category]
    if limit:
        presets = presets[:limit]
    return presets


def resolve_scenario(name_or_path: Union[str, Path]) -> Path:
    """
    Map a preset name to its bundled file; anything else is treated as a path.

    The returned path is not checked for existence.
    """
    candidate = Path(name_or_path)
    if candidate.exists():
        return candidate
    for preset in SCENARIO_PRESETS:
        if str(name_or_path) in (preset["name"], preset["file"]):
            return SCENARIO_DIR / preset["file"]
    return candidate
