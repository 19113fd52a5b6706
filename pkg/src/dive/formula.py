"""Chemical formula parsing and canonical printing.

The grammar covers what extraction actually produces: element symbols with
optional decimal subscripts, parenthesized or bracketed groups with
multipliers, and whitespace or interpunct separators between tokens.
Unicode subscript digits are normalized to ASCII before parsing. Hydrate
notation ("MgCl2.6H2O" style with a leading multiplier after the dot),
charge markers, and isotope labels are not part of the grammar and fail
with a syntax error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .elements import is_element
from .errors import DiveError


class FormulaError(DiveError):
    """Base class for formula parse failures."""


class EmptyFormula(FormulaError):
    pass


class UnknownElement(FormulaError):
    def __init__(self, symbol: str, offset: int):
        super().__init__(f"unknown element {symbol!r} at offset {offset}")
        self.symbol = symbol
        self.offset = offset


class UnbalancedGroup(FormulaError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass
class Composition:
    """Per-element amounts of one material; amounts are positive floats."""

    amounts: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for sym, amt in self.amounts.items():
            if not is_element(sym):
                raise UnknownElement(sym, 0)
            if not amt > 0:
                raise ValueError(f"non-positive amount for {sym}: {amt}")
        if not self.amounts:
            raise ValueError("composition has no elements")

    def total(self) -> float:
        return sum(self.amounts.values())

    def fractions(self) -> dict[str, float]:
        """Molar fractions; sums to 1 up to float rounding."""
        total = self.total()
        return {sym: amt / total for sym, amt in self.amounts.items()}

    def elements(self) -> set[str]:
        return set(self.amounts)

    def scaled(self, k: float) -> "Composition":
        if not k > 0:
            raise ValueError("scale factor must be > 0")
        return Composition({sym: amt * k for sym, amt in self.amounts.items()})

    def almost_equals(self, other: "Composition", tol: float = 1e-9) -> bool:
        if self.amounts.keys() != other.amounts.keys():
            return False
        return all(
            abs(self.amounts[s] - other.amounts[s]) <= tol for s in self.amounts
        )


_SUBSCRIPT_DIGITS = str.maketrans("₀₁₂₃₄₅₆₇₈₉", "0123456789")
_SEPARATORS = " \t·⋅"
_OPENERS = {"(": ")", "[": "]"}


def _byte_offset(s: str, index: int) -> int:
    return len(s[:index].encode("utf-8"))


class _Parser:
    def __init__(self, original: str):
        self.original = original
        self.text = original.translate(_SUBSCRIPT_DIGITS)
        self.i = 0

    def error(self, message: str) -> FormulaSyntaxError:
        return FormulaSyntaxError(message, _byte_offset(self.original, self.i))

    def skip_separators(self):
        while self.i < len(self.text) and self.text[self.i] in _SEPARATORS:
            self.i += 1

    def at_end(self) -> bool:
        self.skip_separators()
        return self.i >= len(self.text)

    def peek(self) -> str:
        self.skip_separators()
        return self.text[self.i] if self.i < len(self.text) else ""

    def parse_number(self) -> float | None:
        self.skip_separators()
        start = self.i
        while self.i < len(self.text) and self.text[self.i].isdigit():
            self.i += 1
        if self.i < len(self.text) and self.text[self.i] == ".":
            dot = self.i
            self.i += 1
            while self.i < len(self.text) and self.text[self.i].isdigit():
                self.i += 1
            if self.i == dot + 1:  # bare trailing dot is a separator misuse
                self.i = dot
        if self.i == start:
            return None
        token = self.text[start:self.i]
        value = float(token)
        if value == 0:
            self.i = start
            raise self.error(f"zero subscript {token!r}")
        return value

    def parse_element(self) -> str:
        self.skip_separators()
        start = self.i
        self.i += 1
        while self.i < len(self.text) and self.text[self.i].islower():
            self.i += 1
        symbol = self.text[start:self.i]
        if not is_element(symbol):
            raise UnknownElement(symbol, _byte_offset(self.original, start))
        return symbol

    def parse_sequence(self, amounts: dict[str, float], multiplier: float, closer: str | None):
        saw_item = False
        while True:
            ch = self.peek()
            if ch == "":
                if closer is not None:
                    raise UnbalancedGroup(f"missing {closer!r}", _byte_offset(self.original, self.i))
                break
            if ch == closer:
                self.i += 1
                break
            if ch in (")", "]"):
                raise UnbalancedGroup(f"unexpected {ch!r}", _byte_offset(self.original, self.i))
            if ch in _OPENERS:
                open_pos = self.i
                self.i += 1
                inner: dict[str, float] = {}
                self.parse_sequence(inner, 1.0, _OPENERS[ch])
                if not inner:
                    self.i = open_pos
                    raise self.error("empty group")
                count = self.parse_number()
                count = 1.0 if count is None else count
                for sym, amt in inner.items():
                    amounts[sym] = amounts.get(sym, 0.0) + amt * count * multiplier
                saw_item = True
            elif ch.isupper():
                symbol = self.parse_element()
                count = self.parse_number()
                count = 1.0 if count is None else count
                amounts[symbol] = amounts.get(symbol, 0.0) + count * multiplier
                saw_item = True
            else:
                raise self.error(f"unexpected character {ch!r}")
        if not saw_item and closer is None:
            raise EmptyFormula("formula has no elements")


def parse_formula(s: str) -> Composition:
    """Parse a formula string into per-element amounts.

    Raises EmptyFormula, UnknownElement, UnbalancedGroup, or
    FormulaSyntaxError (with the byte offset of the problem).
    """
    if not s or not s.strip(_SEPARATORS):
        raise EmptyFormula("empty formula")
    parser = _Parser(s)
    amounts: dict[str, float] = {}
    parser.parse_sequence(amounts, 1.0, None)
    return Composition(amounts)


def _format_amount(v: float) -> str:
    text = f"{v:.4f}".rstrip("0").rstrip(".")
    return text if text else "0"


def canonical_formula(c: Composition) -> str:
    """Scale-invariant canonical string: alphabetical elements, amounts
    rescaled so the smallest is 1, at most 4 decimal places."""
    smallest = min(c.amounts.values())
    parts = []
    for sym in sorted(c.amounts):
        parts.append(f"{sym}{_format_amount(c.amounts[sym] / smallest)}")
    return "".join(parts)
