"""Virtual sensors driven by motion capture and scene meshes.

Thin wrapper over the C++ engine. Configs may be passed as dicts.
"""
import json
import os

from ._vsens import (
    ENGINE_VERSION,
    AccelIndex,
    Motion,
    Recording,
    Session,
    TriangleMesh,
    VsensError,
    expand_prefab,
    parse_bvh,
    parse_obj,
    run_file,
)
from ._vsens import run_json as _run_json

__version__ = ENGINE_VERSION


def run(config, base_dir="."):
    """Batch-run a config (dict or path to a JSON file) and return the Recording."""
    if isinstance(config, (str, os.PathLike)):
        return run_file(os.fspath(config))
    return _run_json(json.dumps(config), os.fspath(base_dir))


def session(config, base_dir="."):
    return Session.from_json(json.dumps(config), os.fspath(base_dir))


def load_bvh(path, unit_scale=1.0):
    with open(path, encoding="utf-8") as f:
        return parse_bvh(f.read(), unit_scale)


def load_obj(path):
    with open(path, encoding="utf-8") as f:
        return parse_obj(f.read(), os.path.splitext(os.path.basename(path))[0])


__all__ = [
    "AccelIndex",
    "Motion",
    "Recording",
    "Session",
    "TriangleMesh",
    "VsensError",
    "expand_prefab",
    "load_bvh",
    "load_obj",
    "parse_bvh",
    "parse_obj",
    "run",
    "session",
]
