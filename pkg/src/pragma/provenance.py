"""Provenance sidecars: resolved config plus content hashes of every output.

Sidecars carry no timestamps or host names, so re-running a command with the
same config reproduces the sidecar byte for byte.
"""

from __future__ import annotations

import json
import os
import platform
from importlib import metadata

import numpy as np
import scipy

SIDECAR_SUFFIX = ".provenance.json"
SCHEMA = 1


def versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {
        "artifact": own,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def sidecar_path(output_path) -> str:
    return os.fspath(output_path) + SIDECAR_SUFFIX


def write_sidecar(path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_sidecar(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("command", "config", "outputs"):
        if key not in doc:
            raise ValueError(f"{path}: not a provenance sidecar (missing {key!r})")
    return doc


def compare_outputs(recorded: dict, recomputed: dict) -> list[str]:
    """Names of outputs whose hashes differ or that appear on only one side."""
    names = sorted(set(recorded) | set(recomputed))
    return [n for n in names if recorded.get(n) != recomputed.get(n)]
