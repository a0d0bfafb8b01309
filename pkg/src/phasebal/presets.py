"""Bundled run and sweep configurations.

Ten single-run presets cover the bundled study scenarios: four penetration
cells on the compact/overload/sparse networks (120% single-phase DG, the
headline stress case of each class) and six storage deployments on the
stylized day. One extra sweep preset covers the full compact penetration
grid for both device kinds and both placements.
"""

from __future__ import annotations

import copy
from typing import Any

_PENETRATION_GRID = [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 120]


def _cell(label: str, load_kw: float, node: str, network_class: str) -> dict[str, Any]:
    return {
        "label": label,
        "scenario": {
            "type": "sweep_cell",
            "total_phase_load_kw": load_kw,
            "device_node": node,
            "kind": "dg",
            "penetration_pct": 120,
            "network_class": network_class,
        },
    }


def _stylized(label: str, architecture: str | None, node: str = "N5", **extra: Any) -> dict[str, Any]:
    scenario: dict[str, Any] = {
        "type": "stylized",
        "architecture": architecture,
        "storage_node": node,
    }
    if architecture is not None:
        scenario["battery_kw"] = 3.0
        scenario["controller"] = "fixed_schedule"
    scenario.update(extra)
    return {"label": label, "scenario": scenario}


_PRESETS: dict[str, dict[str, Any]] = {
    "baseline-n1": _cell("baseline-n1", 5.0, "N1", "compact"),
    "baseline-n5": _cell("baseline-n5", 5.0, "N5", "compact"),
    "overload-n5": _cell("overload-n5", 50.0, "N5", "overload"),
    "sparse-n5": _cell("sparse-n5", 5.0, "N5", "sparse"),
    "stylized-nostorage": _stylized("stylized-nostorage", None),
    "a1-n0": _stylized("a1-n0", "A1", "N0"),
    "a1-n5": _stylized("a1-n5", "A1", "N5"),
    "a2-n0": _stylized("a2-n0", "A2", "N0"),
    "a2-n5": _stylized("a2-n5", "A2", "N5"),
    "a2-n5-noshift": _stylized("a2-n5-noshift", "A2", "N5", allow_load_shift=False),
    "grid-compact": {
        "label": "grid-compact",
        "sweep": {
            "total_phase_load_kw": 5.0,
            "network_class": "compact",
            "penetrations_pct": _PENETRATION_GRID,
            "nodes": ["N1", "N5"],
            "kinds": ["dg", "ev"],
        },
    },
}

RUN_PRESET_NAMES = tuple(name for name, doc in _PRESETS.items() if "scenario" in doc)
SWEEP_PRESET_NAMES = tuple(name for name, doc in _PRESETS.items() if "sweep" in doc)


def preset_names() -> tuple[str, ...]:
    return tuple(_PRESETS)


def preset_config(name: str) -> dict[str, Any]:
    """Deep copy of a named preset configuration document."""
    try:
        return copy.deepcopy(_PRESETS[name])
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(_PRESETS)}"
        ) from None
