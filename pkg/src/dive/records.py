"""Material record schema: validation, canonicalization, JSONL round-trip.

A raw extraction record is a flat key-value map. Validation parses the
formula and every quantity, checks the range invariants, and either
returns a MaterialRecord or a ValidationFailure listing every violated
constraint. An unparseable formula does not fail the record: the
composition is left absent and the problem is flagged in the notes so the
review workflow can fix it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

from .formula import Composition, FormulaError, canonical_formula, parse_formula
from .units import (
    Quantity,
    UnitKindMismatch,
    UnparseableQuantity,
    parse_quantity,
    round_sig,
)

MATERIAL_CLASSES = (
    "interstitial",
    "ionic",
    "complex",
    "porous",
    "high_entropy",
    "superhydride",
    "multi_component",
    "other",
)
INTERSTITIAL_SUBTYPES = ("AB2", "AB3", "AB5", "other")
REVIEW_STATUSES = ("pending", "accepted", "corrected", "rejected")
EXTRACTION_MODES = ("direct", "dive", "manual")

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

# (record attribute, JSONL key, quantity kind)
QUANTITY_FIELDS = (
    ("capacity_wt_pct", "capacity_wt_pct", "gravimetric"),
    ("volumetric_g_per_L", "volumetric_g_per_L", "volumetric"),
    ("absorption_pressure", "absorption_pressure_bar", "pressure"),
    ("desorption_pressure", "desorption_pressure_bar", "pressure"),
    ("desorption_temperature", "desorption_temperature_K", "temperature"),
    ("measurement_temperature", "measurement_temperature_K", "temperature"),
    ("cycles", "cycles", "cycles"),
)

# loose key -> record attribute, for pipeline output that predates canonical names
_KEY_ALIASES = {
    "formula": "formula",
    "material_class": "material_class",
    "class": "material_class",
    "interstitial_subtype": "interstitial_subtype",
    "subtype": "interstitial_subtype",
    "capacity": "capacity_wt_pct",
    "capacity_wt_pct": "capacity_wt_pct",
    "gravimetric_capacity": "capacity_wt_pct",
    "volumetric": "volumetric_g_per_L",
    "volumetric_capacity": "volumetric_g_per_L",
    "volumetric_g_per_l": "volumetric_g_per_L",
    "absorption_pressure": "absorption_pressure",
    "absorption_pressure_bar": "absorption_pressure",
    "desorption_pressure": "desorption_pressure",
    "desorption_pressure_bar": "desorption_pressure",
    "desorption_temperature": "desorption_temperature",
    "desorption_temperature_k": "desorption_temperature",
    "measurement_temperature": "measurement_temperature",
    "measurement_temperature_k": "measurement_temperature",
    "temperature": "measurement_temperature",
    "cycles": "cycles",
    "notes": "notes",
    "provenance": "provenance",
    "review_status": "review_status",
}

_ATTR_TO_KIND = {attr: kind for attr, _, kind in QUANTITY_FIELDS}
_ATTR_TO_KEY = {attr: key for attr, key, _ in QUANTITY_FIELDS}


@dataclass
class Provenance:
    doi: str
    extraction_mode: str = "manual"
    model_tag: str = ""
    figure_id: str | None = None
    timestamp: datetime = EPOCH

    def __post_init__(self):
        if not self.doi:
            raise ValueError("provenance doi must be non-empty")
        if self.extraction_mode not in EXTRACTION_MODES:
            raise ValueError(f"bad extraction mode {self.extraction_mode!r}")

    def to_dict(self) -> dict:
        return {
            "doi": self.doi,
            "figure_id": self.figure_id,
            "extraction_mode": self.extraction_mode,
            "model_tag": self.model_tag,
            "timestamp": self.timestamp.astimezone(timezone.utc).isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        ts = d.get("timestamp")
        when = datetime.fromisoformat(ts) if ts else EPOCH
        if when.tzinfo is None:
            when = when.replace(tzinfo=timezone.utc)
        return cls(
            doi=d["doi"],
            figure_id=d.get("figure_id"),
            extraction_mode=d.get("extraction_mode", "manual"),
            model_tag=d.get("model_tag", ""),
            timestamp=when,
        )


@dataclass
class MaterialRecord:
    formula_raw: str
    provenance: Provenance
    composition: Composition | None = None
    material_class: str | None = None
    interstitial_subtype: str | None = None
    capacity_wt_pct: Quantity | None = None
    volumetric_g_per_L: Quantity | None = None
    absorption_pressure: Quantity | None = None
    desorption_pressure: Quantity | None = None
    desorption_temperature: Quantity | None = None
    measurement_temperature: Quantity | None = None
    cycles: Quantity | None = None
    notes: str = ""
    review_status: str = "pending"

    def canonical_formula(self) -> str | None:
        if self.composition is None:
            return None
        return canonical_formula(self.composition)

    def condition_signature(self) -> tuple:
        """Quantity tuple rounded to 3 significant digits; used with the
        canonical formula (and doi, in the store) as the dedup key."""
        sig = []
        for attr, _, _ in QUANTITY_FIELDS:
            q: Quantity | None = getattr(self, attr)
            sig.append(None if q is None else round_sig(q.canonical_value, 3))
        return tuple(sig)

    def dedup_key(self) -> tuple:
        return (
            self.canonical_formula() or self.formula_raw.strip(),
            self.condition_signature(),
        )


@dataclass
class ValidationFailure:
    raw: dict
    issues: list[tuple[str, str]] = field(default_factory=list)

    def __str__(self):
        listed = "; ".join(f"{f}: {r}" for f, r in self.issues)
        return f"invalid record ({listed})"


def _append_note(notes: str, addition: str) -> str:
    return f"{notes}; {addition}" if notes else addition


def _normalize_class(value) -> str | None:
    if value is None:
        return None
    token = str(value).strip().lower().replace("-", "_").replace(" ", "_")
    if not token:
        return None
    if token in MATERIAL_CLASSES:
        return token
    return "unrecognized:" + token


def validate_record(raw: dict, provenance: Provenance | None = None) -> MaterialRecord | ValidationFailure:
    """Validate one flat raw record.

    Every violated constraint is reported, not just the first. When no
    provenance is embedded or supplied, a manual placeholder is attached.
    """
    issues: list[tuple[str, str]] = []
    notes = ""
    fields: dict = {}
    extras: dict = {}

    for key, value in raw.items():
        attr = _KEY_ALIASES.get(str(key).strip().lower())
        if attr is None:
            extras[str(key)] = value
        elif attr in fields and fields[attr] is not None:
            extras[str(key)] = value  # duplicate alias, keep first
        else:
            fields[attr] = value

    formula = str(fields.get("formula") or "").strip()
    if not formula:
        issues.append(("formula", "missing or empty"))

    composition = None
    if formula:
        try:
            composition = parse_formula(formula)
        except FormulaError as exc:
            notes = _append_note(notes, f"formula parse failed: {exc}")

    material_class = _normalize_class(fields.get("material_class"))
    if material_class and material_class.startswith("unrecognized:"):
        notes = _append_note(notes, f"unrecognized material_class {material_class.split(':', 1)[1]!r}")
        material_class = "other"

    subtype = fields.get("interstitial_subtype")
    if subtype is not None:
        token = str(subtype).strip().upper()
        subtype = token if token in INTERSTITIAL_SUBTYPES else ("other" if token else None)
    if subtype is not None and material_class != "interstitial":
        notes = _append_note(notes, f"dropped interstitial_subtype {subtype!r} (class is {material_class or 'unset'})")
        subtype = None

    quantities: dict[str, Quantity | None] = {}
    for attr, _, kind in QUANTITY_FIELDS:
        value = fields.get(attr)
        if value is None or value == "":
            quantities[attr] = None
            continue
        try:
            quantities[attr] = parse_quantity(value, kind)
        except (UnparseableQuantity, UnitKindMismatch) as exc:
            issues.append((_ATTR_TO_KEY[attr], str(exc)))
            quantities[attr] = None

    cap = quantities.get("capacity_wt_pct")
    if cap is not None and not (0 <= cap.canonical_value <= 100):
        issues.append(("capacity_wt_pct", f"capacity {cap.canonical_value} outside [0, 100] wt.%"))
    for attr in ("desorption_temperature", "measurement_temperature"):
        q = quantities.get(attr)
        if q is not None and not q.canonical_value > 0:
            issues.append((_ATTR_TO_KEY[attr], f"temperature {q.canonical_value} K must be > 0"))
    for attr in ("absorption_pressure", "desorption_pressure"):
        q = quantities.get(attr)
        if q is not None and q.canonical_value < 0:
            issues.append((_ATTR_TO_KEY[attr], f"pressure {q.canonical_value} bar must be >= 0"))

    if extras:
        extra_text = json.dumps(extras, ensure_ascii=False, sort_keys=True, default=str)
        notes = _append_note(notes, f"unrecognized keys: {extra_text}")
    raw_notes = str(fields.get("notes") or "").strip()
    if raw_notes:
        notes = _append_note(raw_notes, notes) if notes else raw_notes

    status = str(fields.get("review_status") or "pending").strip().lower()
    if status not in REVIEW_STATUSES:
        notes = _append_note(notes, f"unrecognized review_status {status!r}")
        status = "pending"

    prov = provenance
    if prov is None:
        embedded = fields.get("provenance")
        if isinstance(embedded, dict):
            try:
                prov = Provenance.from_dict(embedded)
            except (KeyError, ValueError) as exc:
                issues.append(("provenance", f"bad provenance: {exc}"))
        elif embedded is not None:
            issues.append(("provenance", "provenance must be an object"))
    if prov is None and not any(f == "provenance" for f, _ in issues):
        prov = Provenance(doi="unknown")

    if issues:
        return ValidationFailure(raw=dict(raw), issues=issues)

    return MaterialRecord(
        formula_raw=formula,
        provenance=prov,
        composition=composition,
        material_class=material_class,
        interstitial_subtype=subtype,
        notes=notes,
        review_status=status,
        **quantities,
    )


def record_to_dict(r: MaterialRecord) -> dict:
    """Serialize with the exact JSONL key set; quantities become canonical numbers."""
    out = {"formula": r.formula_raw, "material_class": r.material_class,
           "interstitial_subtype": r.interstitial_subtype}
    for attr, key, _ in QUANTITY_FIELDS:
        q: Quantity | None = getattr(r, attr)
        out[key] = None if q is None else q.canonical_value
    out["notes"] = r.notes
    out["provenance"] = r.provenance.to_dict()
    out["review_status"] = r.review_status
    return out


def record_from_dict(d: dict) -> MaterialRecord:
    """Inverse of record_to_dict; the composition is re-parsed from the formula."""
    formula = str(d.get("formula") or "")
    composition = None
    try:
        composition = parse_formula(formula)
    except FormulaError:
        pass
    quantities = {}
    for attr, key, kind in QUANTITY_FIELDS:
        value = d.get(key)
        quantities[attr] = None if value is None else parse_quantity(float(value), kind)
    prov_dict = d.get("provenance")
    prov = Provenance.from_dict(prov_dict) if isinstance(prov_dict, dict) else Provenance(doi="unknown")
    return MaterialRecord(
        formula_raw=formula,
        provenance=prov,
        composition=composition,
        material_class=d.get("material_class"),
        interstitial_subtype=d.get("interstitial_subtype"),
        notes=str(d.get("notes") or ""),
        review_status=str(d.get("review_status") or "pending"),
        **quantities,
    )


def dumps_record(r: MaterialRecord) -> str:
    return json.dumps(record_to_dict(r), ensure_ascii=False)


def write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(dumps_record(r) + "\n")


def read_jsonl(path) -> list[MaterialRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_from_dict(json.loads(line)))
    return out


def with_status(r: MaterialRecord, status: str) -> MaterialRecord:
    if status not in REVIEW_STATUSES:
        raise ValueError(f"bad review status {status!r}")
    return replace(r, review_status=status)
