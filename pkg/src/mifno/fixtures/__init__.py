"""Bundled FCIDUMP fixtures and their reference energies (see manifest.json)."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

FIXTURE_DIR = Path(__file__).resolve().parent


def fixture_path(name: str) -> Path:
    """Path of ``<name>.fcidump``."""
    path = FIXTURE_DIR / f"{name}.fcidump"
    if not path.exists():
        raise FileNotFoundError(f"no fixture named {name!r}")
    return path


@lru_cache(maxsize=None)
def manifest() -> dict:
    return json.loads((FIXTURE_DIR / "manifest.json").read_text())


def reference(name: str) -> dict:
    """Reference energies (hartree) recorded when the fixture was generated."""
    return manifest()["fixtures"][name]["reference"]
