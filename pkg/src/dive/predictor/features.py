"""Composition features: per-property weighted statistics plus the full
molar-fraction block.

For each of the 12 embedded element properties we compute six statistics
over the composition's elements, weighted by molar fraction: mean, average
deviation, min, max, range, and mode (the property value of the element
with the largest fraction, lower atomic number on ties). The 103-element
molar-fraction block follows, in atomic-number order, so the vector length
is fixed by the schema regardless of composition.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .. import elements
from ..errors import DiveError
from ..formula import Composition

PROPERTIES = elements.PROPERTY_NAMES
STATS = ("mean", "avg_dev", "min", "max", "range", "mode")

FEATURE_NAMES: tuple[str, ...] = tuple(
    f"{prop}_{stat}" for prop in PROPERTIES for stat in STATS
) + tuple(f"frac_{sym}" for sym in elements.SYMBOLS)

_FRACTION_OFFSET = len(PROPERTIES) * len(STATS)
_SYMBOL_INDEX = {sym: i for i, sym in enumerate(elements.SYMBOLS)}


class UnknownElement(DiveError):
    pass


class MissingProperty(DiveError):
    def __init__(self, symbol: str, prop: str):
        super().__init__(f"element {symbol} has no value for {prop}")
        self.symbol = symbol
        self.prop = prop


@dataclass
class FeatureVector:
    values: np.ndarray

    @property
    def names(self) -> tuple[str, ...]:
        return FEATURE_NAMES

    def __len__(self) -> int:
        return len(self.values)


def schema_hash() -> str:
    """Digest of the feature names and the element property table; a model
    trained under a different table refuses to predict."""
    table = [
        [sym] + [elements.element_property(sym, p) for p in PROPERTIES]
        for sym in elements.SYMBOLS
    ]
    blob = json.dumps({"names": FEATURE_NAMES, "table": table},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def featurize(c: Composition) -> FeatureVector:
    """Feature vector for one composition; exact under integer rescaling of
    the amounts because only molar fractions enter."""
    # fixed element order (by atomic number) keeps float summation stable
    symbols = sorted(c.amounts, key=lambda s: elements.ATOMIC_NUMBER.get(s, 10**6))
    for sym in symbols:
        if sym not in elements.ELEMENTS:
            raise UnknownElement(f"no element data for {sym!r}")
    fractions = c.fractions()
    fracs = np.array([fractions[s] for s in symbols], dtype=np.float64)

    values = np.zeros(len(FEATURE_NAMES), dtype=np.float64)
    mode_index = 0
    for i, sym in enumerate(symbols):
        if fracs[i] > fracs[mode_index]:
            mode_index = i
        elif fracs[i] == fracs[mode_index] and (
            elements.ATOMIC_NUMBER[sym] < elements.ATOMIC_NUMBER[symbols[mode_index]]
        ):
            mode_index = i

    for p_idx, prop in enumerate(PROPERTIES):
        raw = [elements.element_property(sym, prop) for sym in symbols]
        for sym, v in zip(symbols, raw):
            if v is None:
                raise MissingProperty(sym, prop)
        props = np.array(raw, dtype=np.float64)
        mean = float(np.dot(fracs, props))
        avg_dev = float(np.dot(fracs, np.abs(props - mean)))
        p_min = float(props.min())
        p_max = float(props.max())
        base = p_idx * len(STATS)
        values[base + 0] = mean
        values[base + 1] = avg_dev
        values[base + 2] = p_min
        values[base + 3] = p_max
        values[base + 4] = p_max - p_min
        values[base + 5] = float(props[mode_index])

    for sym, frac in zip(symbols, fracs):
        values[_FRACTION_OFFSET + _SYMBOL_INDEX[sym]] = frac

    if not np.isfinite(values).all():
        raise ValueError("feature vector contains NaN or Inf")
    frac_sum = float(values[_FRACTION_OFFSET:].sum())
    if abs(frac_sum - 1.0) > 1e-9:
        raise ValueError(f"molar fractions sum to {frac_sum}, not 1")
    return FeatureVector(values=values)
