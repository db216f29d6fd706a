"""
CSV output with a provenance header.

Every CSV starts with ``#`` comment lines carrying the scenario hash, the
seed(s) and the package version; there are no timestamps, so reruns are
byte-identical.
"""

from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import pandas as pd
from loguru import logger

from .. import __version__
from ..models.scenario import ScenarioConfig, scenario_hash


def provenance_lines(cfg: ScenarioConfig, seeds: Union[int, Sequence[int]],
                     extra: Optional[Dict[str, str]] = None) -> list:
    seed_text = str(seeds) if isinstance(seeds, int) else ",".join(str(s) for s in seeds)
    lines = [
        f"# scenario_sha256: {scenario_hash(cfg)}",
        f"# seed: {seed_text}",
        f"# version: leo_offload {__version__}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def write_csv(frame: pd.DataFrame, path: Union[str, Path], cfg: ScenarioConfig,
              seeds: Union[int, Sequence[int]], extra: Optional[Dict[str, str]] = None) -> Path:
    """Write a frame as CSV preceded by the provenance header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write("\n".join(provenance_lines(cfg, seeds, extra)) + "\n")
        frame.to_csv(f, index=False, lineterminator="\n")
    logger.info(f"💾 Wrote {len(frame)} rows to {path}")
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Read a CSV written by ``write_csv``, skipping the header comments."""
    return pd.read_csv(path, comment="#")


def read_header(path: Union[str, Path]) -> Dict[str, str]:
    header = {}
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            header[key] = value
    return header
