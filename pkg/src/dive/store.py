"""Append-only record store with rebuildable indexes and review audit.

Layout: `segments/*.jsonl` hold `{"id": n, "record": {...}}` lines; a later
line with an existing id supersedes the earlier version (corrections and
status flips are new versions, never in-place edits). `audit.jsonl` logs
every review action with the prior value. Each mutation commits one new
segment via write-temp-then-rename, so a crash mid-append leaves the store
at its previous state.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import DiveError
from .formula import parse_formula
from .records import (
    MaterialRecord,
    ValidationFailure,
    record_from_dict,
    record_to_dict,
    validate_record,
    with_status,
)


class StorageIO(DiveError):
    pass


class UnknownId(DiveError):
    pass


class BadBinEdges(DiveError):
    pass


class ReviewConflict(DiveError):
    """The record is already in the state the action would produce."""


class CorrectionRejected(DiveError):
    def __init__(self, failure: ValidationFailure):
        super().__init__(str(failure))
        self.failure = failure


@dataclass
class QueryFilter:
    material_class: str | None = None
    element_contains: set[str] | None = None
    capacity_lo: float | None = None
    capacity_hi: float | None = None
    temperature_lo: float | None = None
    temperature_hi: float | None = None
    doi: str | None = None
    review_status: str | None = None

    def __post_init__(self):
        for lo, hi in ((self.capacity_lo, self.capacity_hi),
                       (self.temperature_lo, self.temperature_hi)):
            if lo is not None and hi is not None and lo > hi:
                raise ValueError("range bounds must satisfy lo <= hi")

    def matches(self, r: MaterialRecord) -> bool:
        if self.doi is not None and r.provenance.doi != self.doi:
            return False
        if self.review_status is not None and r.review_status != self.review_status:
            return False
        if self.material_class is not None and r.material_class != self.material_class:
            return False
        if self.element_contains:
            if r.composition is None:
                return False
            if not set(self.element_contains) <= r.composition.elements():
                return False
        if self.capacity_lo is not None or self.capacity_hi is not None:
            if r.capacity_wt_pct is None:
                return False
            cap = r.capacity_wt_pct.canonical_value
            if self.capacity_lo is not None and cap < self.capacity_lo:
                return False
            if self.capacity_hi is not None and cap > self.capacity_hi:
                return False
        if self.temperature_lo is not None or self.temperature_hi is not None:
            temp = r.measurement_temperature or r.desorption_temperature
            if temp is None:
                return False
            t = temp.canonical_value
            if self.temperature_lo is not None and t < self.temperature_lo:
                return False
            if self.temperature_hi is not None and t > self.temperature_hi:
                return False
        return True


def _store_dedup_key(r: MaterialRecord) -> tuple:
    return (r.provenance.doi,) + r.dedup_key()


class RecordStore:
    def __init__(self, path, create: bool = True):
        self.root = Path(path)
        self.segments_dir = self.root / "segments"
        self.audit_path = self.root / "audit.jsonl"
        if create:
            self.segments_dir.mkdir(parents=True, exist_ok=True)
        elif not self.segments_dir.is_dir():
            raise StorageIO(f"no store at {self.root}")
        self._write_lock = threading.Lock()
        self._records: dict[int, MaterialRecord] = {}
        self._by_doi: dict[str, list[int]] = {}
        self._by_formula: dict[str, list[int]] = {}
        self._dedup: set[tuple] = set()
        self._next_id = 1
        self._next_segment = 1
        self._load()

    # -- loading and indexing ------------------------------------------

    def _load(self):
        self._records.clear()
        for segment in sorted(self.segments_dir.glob("*.jsonl")):
            seq = int(segment.stem)
            self._next_segment = max(self._next_segment, seq + 1)
            try:
                lines = segment.read_text("utf-8").splitlines()
            except OSError as exc:
                raise StorageIO(f"cannot read {segment}: {exc}") from exc
            for line in lines:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                rid = int(entry["id"])
                self._records[rid] = record_from_dict(entry["record"])
                self._next_id = max(self._next_id, rid + 1)
        self._records = dict(sorted(self._records.items()))
        self._rebuild_index()

    def _rebuild_index(self):
        self._by_doi.clear()
        self._by_formula.clear()
        self._dedup.clear()
        for rid, r in self._records.items():
            self._index_one(rid, r)

    def _index_one(self, rid: int, r: MaterialRecord):
        self._by_doi.setdefault(r.provenance.doi, []).append(rid)
        cf = r.canonical_formula()
        if cf is not None:
            self._by_formula.setdefault(cf, []).append(rid)
        self._dedup.add(_store_dedup_key(r))

    def _commit_segment(self, lines: list[dict]):
        name = f"{self._next_segment:06d}.jsonl"
        tmp = self.segments_dir / (name + ".tmp")
        final = self.segments_dir / name
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                for entry in lines:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, final)
        except OSError as exc:
            tmp.unlink(missing_ok=True)
            raise StorageIO(f"segment commit failed: {exc}") from exc
        self._next_segment += 1

    # -- mutations ------------------------------------------------------

    def append(self, records: list[MaterialRecord]) -> tuple[list[int], list[MaterialRecord]]:
        """Append validated records; duplicates (same doi, canonical formula,
        and condition signature) are skipped and returned."""
        with self._write_lock:
            fresh: list[tuple[int, MaterialRecord]] = []
            skipped: list[MaterialRecord] = []
            seen_batch: set[tuple] = set()
            next_id = self._next_id
            for r in records:
                key = _store_dedup_key(r)
                if key in self._dedup or key in seen_batch:
                    skipped.append(r)
                    continue
                seen_batch.add(key)
                fresh.append((next_id, r))
                next_id += 1
            if fresh:
                self._commit_segment(
                    [{"id": rid, "record": record_to_dict(r)} for rid, r in fresh]
                )
                for rid, r in fresh:
                    self._records[rid] = r
                    self._index_one(rid, r)
                self._next_id = next_id
            return [rid for rid, _ in fresh], skipped

    def set_review(self, record_id: int, action: str, reviewer: str,
                   corrected: dict | None = None) -> MaterialRecord:
        """Apply a review action; corrections re-validate and keep the prior
        version in the audit trail."""
        with self._write_lock:
            current = self._records.get(record_id)
            if current is None:
                raise UnknownId(f"no record with id {record_id}")
            if action == "accept":
                if current.review_status == "accepted":
                    raise ReviewConflict(f"record {record_id} is already accepted")
                updated = with_status(current, "accepted")
            elif action == "reject":
                if current.review_status == "rejected":
                    raise ReviewConflict(f"record {record_id} is already rejected")
                updated = with_status(current, "rejected")
            elif action == "correct":
                if corrected is None:
                    raise ValueError("correct action needs the corrected record")
                result = validate_record(corrected, provenance=current.provenance)
                if isinstance(result, ValidationFailure):
                    raise CorrectionRejected(result)
                updated = with_status(result, "corrected")
            else:
                raise ValueError(f"unknown review action {action!r}")

            self._commit_segment([{"id": record_id, "record": record_to_dict(updated)}])
            audit_entry = {
                "id": record_id,
                "action": action,
                "reviewer": reviewer,
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "prior": record_to_dict(current),
            }
            with open(self.audit_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(audit_entry, ensure_ascii=False) + "\n")
            self._records[record_id] = updated
            self._rebuild_index()
            return updated

    # -- reads ----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._records)

    def get(self, record_id: int) -> MaterialRecord:
        try:
            return self._records[record_id]
        except KeyError:
            raise UnknownId(f"no record with id {record_id}") from None

    def ids(self) -> list[int]:
        return list(self._records)

    def records(self) -> list[tuple[int, MaterialRecord]]:
        return list(self._records.items())

    def query(self, f: QueryFilter | None = None) -> list[tuple[int, MaterialRecord]]:
        if f is None:
            return self.records()
        return [(rid, r) for rid, r in self._records.items() if f.matches(r)]

    def pending(self) -> list[tuple[int, MaterialRecord]]:
        """Review queue: pending records, oldest (lowest id) first."""
        return self.query(QueryFilter(review_status="pending"))

    def audit(self, record_id: int | None = None) -> list[dict]:
        if not self.audit_path.exists():
            return []
        entries = [json.loads(line) for line in self.audit_path.read_text("utf-8").splitlines() if line.strip()]
        if record_id is None:
            return entries
        return [e for e in entries if e["id"] == record_id]

    # -- analytics ------------------------------------------------------

    def capacity_histogram(self, bin_edges: list[float]) -> dict[str, list[int]]:
        """Counts per half-open bin [lo, hi), partitioned by material class.
        Records without a capacity are excluded."""
        if len(bin_edges) < 2 or any(b <= a for a, b in zip(bin_edges, bin_edges[1:])):
            raise BadBinEdges(f"bin edges must be strictly increasing: {bin_edges}")
        out: dict[str, list[int]] = {}
        nbins = len(bin_edges) - 1
        for _, r in self._records.items():
            if r.capacity_wt_pct is None:
                continue
            cap = r.capacity_wt_pct.canonical_value
            cls = r.material_class or "other"
            bins = out.setdefault(cls, [0] * nbins)
            for k in range(nbins):
                if bin_edges[k] <= cap < bin_edges[k + 1]:
                    bins[k] += 1
                    break
        return out

    def element_frequency(self, capacity_lo: float, capacity_hi: float) -> list[tuple[str, int]]:
        """Element -> record count over records with composition and capacity
        in [lo, hi); hydrogen excluded; descending count, then alphabetical."""
        if not capacity_lo < capacity_hi:
            raise ValueError("capacity_lo must be < capacity_hi")
        counts: dict[str, int] = {}
        for _, r in self._records.items():
            if r.composition is None or r.capacity_wt_pct is None:
                continue
            cap = r.capacity_wt_pct.canonical_value
            if not (capacity_lo <= cap < capacity_hi):
                continue
            for el in r.composition.elements():
                if el == "H":
                    continue
                counts[el] = counts.get(el, 0) + 1
        return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))

    def dopant_analysis(self, base_formula: str, top_k: int) -> list[dict]:
        """Top added elements across records containing every base element,
        with the matching records' capacity/temperature/pressure values."""
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        base = parse_formula(base_formula).elements()
        counts: dict[str, int] = {}
        values: dict[str, dict[str, list[float]]] = {}
        for _, r in self._records.items():
            if r.composition is None:
                continue
            els = r.composition.elements()
            if not base <= els:
                continue
            dopants = {el for el in els - base if el != "H"}
            for el in dopants:
                counts[el] = counts.get(el, 0) + 1
                slot = values.setdefault(el, {"capacity_wt_pct": [], "desorption_temperature_K": [],
                                              "absorption_pressure_bar": []})
                if r.capacity_wt_pct is not None:
                    slot["capacity_wt_pct"].append(r.capacity_wt_pct.canonical_value)
                if r.desorption_temperature is not None:
                    slot["desorption_temperature_K"].append(r.desorption_temperature.canonical_value)
                if r.absorption_pressure is not None:
                    slot["absorption_pressure_bar"].append(r.absorption_pressure.canonical_value)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
        return [
            {"element": el, "count": count, **values[el]}
            for el, count in ranked
        ]

    def has_canonical_formula(self, canonical: str) -> bool:
        return canonical in self._by_formula

    # -- import/export --------------------------------------------------

    def export_jsonl(self, path) -> int:
        with open(path, "w", encoding="utf-8") as fh:
            for _, r in self._records.items():
                fh.write(json.dumps(record_to_dict(r), ensure_ascii=False) + "\n")
        return len(self._records)
