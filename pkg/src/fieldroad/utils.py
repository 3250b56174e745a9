"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0
"""

import copy
import hashlib
import json
from pathlib import Path
from typing import Any

import yaml

with open(Path(__file__).parent / "defaults.yaml", "r") as f:
    config = yaml.safe_load(f)


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """
    Recursively merge `override` into a copy of `base`. Nested dictionaries are
    merged key by key, anything else in `override` replaces the base value.
    """
    merged = copy.deepcopy(base)

    for key, val in override.items():
        if isinstance(val, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], val)
        else:
            merged[key] = copy.deepcopy(val)

    return merged


def section(name: str) -> dict[str, Any]:
    """
    Return a copy of one top-level section of the packaged defaults.
    """
    try:
        return copy.deepcopy(config[name])
    except KeyError as e:
        raise KeyError(f"No default section named '{name}'") from e


def preset(name: str) -> dict[str, Any]:
    """
    Return a copy of a named desk-scale preset from the packaged defaults.
    """
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError as e:
        raise KeyError(
            f"Unknown preset '{name}'. Available presets: {sorted(PRESETS)}"
        ) from e


def fingerprint(*parts: Any) -> str:
    """
    Stable hash of a sequence of objects. Bytes are hashed as they are,
    objects with a `tobytes` method (numpy arrays) through it, everything else
    through its sorted JSON form.
    """
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            digest.update(part)
        elif hasattr(part, "tobytes"):
            digest.update(part.tobytes())
        else:
            digest.update(json.dumps(part, sort_keys=True, default=str).encode())
        digest.update(b"\x00")
    return digest.hexdigest()


QUADRATURE_DEFAULTS = section("quadrature")
SIMULATION_DEFAULTS = section("simulation")
CUBIC_TOLERANCES = section("cubic")
PHI_TOLERANCES = section("phi")
PRESETS: dict[str, dict[str, Any]] = config.get("presets", {})
