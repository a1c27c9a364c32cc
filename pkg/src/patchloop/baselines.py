"""Loading of baseline model pools.

A small bundled pool covering all six datasets ships inside the package as
plain source files plus a manifest; external pools load from a manifest
JSON whose ``file`` entries are resolved relative to the manifest itself.
The model files are data, never imported.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .records import BaselineRecord

_DATA_PACKAGE = "patchloop"
_DATA_DIR = "data/baselines"


def load_bundled() -> list[BaselineRecord]:
    """The bundled pool: seven small models across the six datasets."""
    root = resources.files(_DATA_PACKAGE).joinpath(_DATA_DIR)
    manifest = json.loads(root.joinpath("manifest.json").read_text(encoding="utf-8"))
    pool = []
    for entry in manifest:
        source = root.joinpath(entry["file"]).read_text(encoding="utf-8")
        pool.append(
            BaselineRecord(
                baseline_id=entry["baseline_id"],
                dataset=entry["dataset"],
                source=source,
                hp=entry["hp"],
                transform_ref=entry["transform_ref"],
            )
        )
    return pool


def load_manifest(path: str | Path) -> list[BaselineRecord]:
    """Load a pool from an external manifest file."""
    path = Path(path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    pool = []
    for entry in manifest:
        source = (path.parent / entry["file"]).read_text(encoding="utf-8")
        pool.append(
            BaselineRecord(
                baseline_id=entry["baseline_id"],
                dataset=entry["dataset"],
                source=source,
                hp=entry.get("hp", {}),
                transform_ref=entry.get("transform_ref", ""),
            )
        )
    return pool
