"""Embedded element table, H through Lr.

Loaded once from ``data/elements.json`` (regenerate with
``tools/gen_element_table.py``). The formula parser only needs symbols;
the composition featurizer uses the per-element properties.
"""

from __future__ import annotations

import json
from importlib import resources

PROPERTY_NAMES = (
    "atomic_number",
    "atomic_weight",
    "period",
    "group",
    "covalent_radius_pm",
    "electronegativity",
    "valence_s",
    "valence_p",
    "valence_d",
    "valence_f",
    "valence_total",
    "melting_point_K",
)


def _load() -> dict[str, dict]:
    text = resources.files("dive").joinpath("data/elements.json").read_text("utf-8")
    data = json.loads(text)
    return {entry["symbol"]: entry for entry in data["elements"]}

ELEMENTS: dict[str, dict] = _load()

# Symbols ordered by atomic number; fixes the molar-fraction feature block.
SYMBOLS: tuple[str, ...] = tuple(
    sorted(ELEMENTS, key=lambda s: ELEMENTS[s]["atomic_number"])
)

ATOMIC_NUMBER: dict[str, int] = {s: ELEMENTS[s]["atomic_number"] for s in ELEMENTS}


def is_element(symbol: str) -> bool:
    return symbol in ELEMENTS


def atomic_weight(symbol: str) -> float:
    return ELEMENTS[symbol]["atomic_weight"]


def element_property(symbol: str, prop: str) -> float:
    """Raw property value; KeyError for unknown symbol or property."""
    return ELEMENTS[symbol][prop]
