"""Quantity parsing and unit canonicalization.

Each field kind has one canonical unit: temperature K, pressure bar,
gravimetric capacity wt.%, volumetric capacity g/L, cycle counts a plain
number. Conversions are affine (canonical = value * scale + offset), so
they invert exactly for round-trip checks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DiveError

KINDS = ("temperature", "pressure", "gravimetric", "volumetric", "cycles")

CANONICAL_UNIT = {
    "temperature": "K",
    "pressure": "bar",
    "gravimetric": "wt.%",
    "volumetric": "g/L",
    "cycles": "cycles",
}


class UnparseableQuantity(DiveError):
    pass


class UnitKindMismatch(DiveError):
    def __init__(self, unit: str, offered: str, actual: str):
        super().__init__(f"unit {unit!r} belongs to kind {actual!r}, not {offered!r}")
        self.unit = unit
        self.offered_kind = offered
        self.actual_kind = actual


@dataclass
class Quantity:
    """A numeric field value with its source unit and canonical form."""

    value: float
    unit: str
    canonical_value: float
    canonical_unit: str

    def __post_init__(self):
        if self.canonical_unit not in set(CANONICAL_UNIT.values()) | {"dimensionless"}:
            raise ValueError(f"bad canonical unit {self.canonical_unit!r}")


# normalized token -> (kind, display unit, scale, offset)
_UNIT_TABLE = {
    "k": ("temperature", "K", 1.0, 0.0),
    "°c": ("temperature", "°C", 1.0, 273.15),
    "c": ("temperature", "°C", 1.0, 273.15),
    "degc": ("temperature", "°C", 1.0, 273.15),
    "celsius": ("temperature", "°C", 1.0, 273.15),
    "℃": ("temperature", "°C", 1.0, 273.15),
    "bar": ("pressure", "bar", 1.0, 0.0),
    "mbar": ("pressure", "mbar", 1e-3, 0.0),
    "mpa": ("pressure", "MPa", 10.0, 0.0),
    "kpa": ("pressure", "kPa", 1e-2, 0.0),
    "pa": ("pressure", "Pa", 1e-5, 0.0),
    "gpa": ("pressure", "GPa", 1e4, 0.0),
    "atm": ("pressure", "atm", 1.01325, 0.0),
    "wt%": ("gravimetric", "wt.%", 1.0, 0.0),
    "mass%": ("gravimetric", "wt.%", 1.0, 0.0),
    "%": ("gravimetric", "wt.%", 1.0, 0.0),
    "wt%h2": ("gravimetric", "wt.%", 1.0, 0.0),
    "g/l": ("volumetric", "g/L", 1.0, 0.0),
    "gh2/l": ("volumetric", "g/L", 1.0, 0.0),
    "kg/m3": ("volumetric", "g/L", 1.0, 0.0),
    "cycles": ("cycles", "cycles", 1.0, 0.0),
    "cycle": ("cycles", "cycles", 1.0, 0.0),
}

_VALUE_RE = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][+-]?\d+)?)\s*(.*?)\s*$")
_SUBSCRIPT_2 = str.maketrans({"₂": "2", "³": "3", "₃": "3"})


def _normalize_unit(text: str) -> str:
    text = text.translate(_SUBSCRIPT_2)
    return text.replace(" ", "").replace(".", "").lower()


def _lookup(unit_text: str, kind: str) -> tuple[str, float, float]:
    token = _normalize_unit(unit_text)
    if token == "":
        # bare numbers are taken to already be in the canonical unit
        return CANONICAL_UNIT[kind], 1.0, 0.0
    entry = _UNIT_TABLE.get(token)
    if entry is None:
        raise UnparseableQuantity(f"unrecognized unit {unit_text!r}")
    unit_kind, display, scale, offset = entry
    if unit_kind != kind:
        raise UnitKindMismatch(display, kind, unit_kind)
    return display, scale, offset


def parse_quantity(s, kind: str) -> Quantity:
    """Parse a value-with-unit string (or bare number) for a field kind
    and convert it to the kind's canonical unit."""
    if kind not in KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    if isinstance(s, (int, float)) and not isinstance(s, bool):
        return quantity_from_canonical(float(s), kind)
    if not isinstance(s, str):
        raise UnparseableQuantity(f"cannot parse {type(s).__name__} as quantity")
    m = _VALUE_RE.match(s)
    if not m:
        raise UnparseableQuantity(f"no numeric value in {s!r}")
    value = float(m.group(1))
    display, scale, offset = _lookup(m.group(2), kind)
    return Quantity(
        value=value,
        unit=display,
        canonical_value=value * scale + offset,
        canonical_unit=CANONICAL_UNIT[kind],
    )


def quantity_from_canonical(value: float, kind: str) -> Quantity:
    unit = CANONICAL_UNIT[kind]
    return Quantity(value=value, unit=unit, canonical_value=value, canonical_unit=unit)


def to_source_unit(canonical_value: float, unit: str, kind: str) -> float:
    """Invert canonicalization: canonical value -> value in `unit`."""
    display, scale, offset = _lookup(unit, kind)
    return (canonical_value - offset) / scale


def round_sig(value: float, digits: int = 3) -> float:
    """Round to a number of significant digits (0 stays 0)."""
    if value == 0:
        return 0.0
    return float(f"{value:.{digits}g}")


def format_sig(value: float, digits: int = 3) -> str:
    """Significant-digit formatting used by match keys: 573.15 -> '573'."""
    return f"{round_sig(value, digits):g}"
