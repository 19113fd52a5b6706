"""Extraction scoring: entry matching plus accuracy/completeness points.

Gold and predicted record lists are matched one-to-one by embedding
similarity of compact match keys, then each matched pair is scored
field-by-field with a clipped relative error. The sum of entry scores S
yields accuracy = 50*S/|pred| and completeness = 50*S/|gold|, for a total
out of 100. All parameters (epsilon, match threshold, denominators) are
carried in the report so alternative scoring functions stay pluggable.

The report total is a bounded scalar, so it can double as a reward signal
when tuning an extraction model against a curated gold set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .gateway import fallback_embed
from .records import QUANTITY_FIELDS, MaterialRecord
from .units import format_sig

EPSILON = 1e-6
MATCH_THRESHOLD = 0.5

PARAMS = {
    "epsilon": EPSILON,
    "match_threshold": MATCH_THRESHOLD,
    "accuracy_denominator": "pred",
    "completeness_denominator": "gold",
    "field_score": "clipped_relative_error",
    "assignment": "optimal_one_to_one",
}


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]
    unmatched_gold: list[int]
    unmatched_pred: list[int]


@dataclass
class PairScore:
    gold_index: int
    pred_index: int
    similarity: float
    entry_score: float
    fields: dict[str, float]


@dataclass
class ScoreReport:
    accuracy: float
    completeness: float
    total: float
    per_pair: list[PairScore]
    unmatched_gold: list[int]
    unmatched_pred: list[int]
    params: dict = field(default_factory=lambda: dict(PARAMS))

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "completeness": self.completeness,
            "total": self.total,
            "params": self.params,
            "pairs": [
                {
                    "gold": p.gold_index,
                    "pred": p.pred_index,
                    "similarity": p.similarity,
                    "entry_score": p.entry_score,
                    "fields": p.fields,
                }
                for p in self.per_pair
            ],
            "unmatched_gold": self.unmatched_gold,
            "unmatched_pred": self.unmatched_pred,
        }


def match_key(r: MaterialRecord) -> str:
    """Compact entry identity for embedding: formula, class, and rounded
    conditions. Measured properties (capacity) are scored, not matched on."""
    parts = [r.formula_raw.strip()]
    if r.material_class is not None:
        parts.append(r.material_class)
    temp = r.measurement_temperature or r.desorption_temperature
    if temp is not None:
        parts.append(f"T={format_sig(temp.canonical_value)}")
    pressure = r.absorption_pressure or r.desorption_pressure
    if pressure is not None:
        parts.append(f"P={format_sig(pressure.canonical_value)}")
    return " | ".join(parts)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = float(np.dot(a, b) / (na * nb))
    return max(-1.0, min(1.0, value))


def similarity_matrix(gold_keys: list[str], pred_keys: list[str], embedder) -> np.ndarray:
    cache: dict[str, np.ndarray] = {}

    def embed(key: str) -> np.ndarray:
        if key not in cache:
            cache[key] = np.asarray(embedder(key), dtype=np.float64)
        return cache[key]

    sim = np.zeros((len(gold_keys), len(pred_keys)), dtype=np.float64)
    for i, gk in enumerate(gold_keys):
        for j, pk in enumerate(pred_keys):
            # equal keys are identical by definition; skip float round-trip
            sim[i, j] = 1.0 if gk == pk else cosine(embed(gk), embed(pk))
    return sim


def match_entries(gold: list[MaterialRecord], pred: list[MaterialRecord],
                  embedder=fallback_embed,
                  threshold: float = MATCH_THRESHOLD) -> MatchResult:
    """Optimal one-to-one assignment on match-key similarity; assigned
    pairs below the threshold are dropped back to unmatched."""
    if not gold or not pred:
        return MatchResult([], list(range(len(gold))), list(range(len(pred))))
    sim = similarity_matrix([match_key(r) for r in gold], [match_key(r) for r in pred], embedder)
    rows, cols = linear_sum_assignment(-sim)
    pairs = []
    for i, j in zip(rows.tolist(), cols.tolist()):
        if sim[i, j] >= threshold:
            pairs.append((i, j, float(sim[i, j])))
    pairs.sort(key=lambda p: p[0])
    matched_gold = {i for i, _, _ in pairs}
    matched_pred = {j for _, j, _ in pairs}
    return MatchResult(
        pairs=pairs,
        unmatched_gold=[i for i in range(len(gold)) if i not in matched_gold],
        unmatched_pred=[j for j in range(len(pred)) if j not in matched_pred],
    )


def _numeric_score(gold_value: float, pred_value: float | None, eps: float = EPSILON) -> float:
    if pred_value is None:
        return 0.0
    if abs(gold_value) < eps:
        return 1.0 if abs(pred_value) <= eps else 0.0
    return max(0.0, 1.0 - abs(pred_value - gold_value) / max(abs(gold_value), eps))


def score_pair(gold: MaterialRecord, pred: MaterialRecord) -> tuple[float, dict[str, float]]:
    """Entry score in [0, 1]: mean over every scorable field present in the
    gold record. Fields the prediction lacks score 0."""
    fields: dict[str, float] = {}

    if gold.composition is not None:
        if pred.composition is not None:
            fields["composition"] = 1.0 if gold.canonical_formula() == pred.canonical_formula() else 0.0
        else:
            fields["composition"] = 0.0
    else:
        fields["composition"] = 1.0 if gold.formula_raw.strip() == pred.formula_raw.strip() else 0.0

    if gold.material_class is not None:
        fields["material_class"] = 1.0 if pred.material_class == gold.material_class else 0.0
    if gold.interstitial_subtype is not None:
        fields["interstitial_subtype"] = 1.0 if pred.interstitial_subtype == gold.interstitial_subtype else 0.0

    for attr, key, _ in QUANTITY_FIELDS:
        gq = getattr(gold, attr)
        if gq is None:
            continue
        pq = getattr(pred, attr)
        fields[key] = _numeric_score(gq.canonical_value, None if pq is None else pq.canonical_value)

    entry = math.fsum(fields.values()) / len(fields)
    return entry, fields


def score_extraction(gold: list[MaterialRecord], pred: list[MaterialRecord],
                     embedder=fallback_embed) -> ScoreReport:
    match = match_entries(gold, pred, embedder)
    per_pair = []
    for i, j, sim in match.pairs:
        entry, fields = score_pair(gold[i], pred[j])
        per_pair.append(PairScore(i, j, sim, entry, fields))
    s = math.fsum(p.entry_score for p in per_pair)

    if not gold and not pred:
        accuracy = completeness = 50.0
    else:
        accuracy = 50.0 * s / len(pred) if pred else 0.0
        completeness = 50.0 * s / len(gold) if gold else 0.0
    return ScoreReport(
        accuracy=accuracy,
        completeness=completeness,
        total=accuracy + completeness,
        per_pair=per_pair,
        unmatched_gold=match.unmatched_gold,
        unmatched_pred=match.unmatched_pred,
    )


@dataclass
class CorpusReport:
    per_paper: list[ScoreReport]
    mean_accuracy: float
    mean_completeness: float
    mean_total: float
    summary: dict

    def to_dict(self) -> dict:
        return {
            "accuracy": self.mean_accuracy,
            "completeness": self.mean_completeness,
            "total": self.mean_total,
            "params": dict(PARAMS),
            "per_paper": [r.to_dict() for r in self.per_paper],
            "summary": self.summary,
        }


def score_corpus(pairs: list[tuple[list[MaterialRecord], list[MaterialRecord]]],
                 embedder=fallback_embed) -> CorpusReport:
    """Unweighted per-paper mean of extraction scores plus a distribution
    summary of the per-paper totals."""
    if not pairs:
        raise ValueError("corpus scoring needs at least one (gold, pred) pair")
    reports = [score_extraction(g, p, embedder) for g, p in pairs]
    totals = np.array([r.total for r in reports], dtype=np.float64)
    n = len(reports)
    summary = {
        "min": float(totals.min()),
        "q1": float(np.percentile(totals, 25)),
        "median": float(np.percentile(totals, 50)),
        "q3": float(np.percentile(totals, 75)),
        "max": float(totals.max()),
        "n_papers": n,
    }
    return CorpusReport(
        per_paper=reports,
        mean_accuracy=math.fsum(r.accuracy for r in reports) / n,
        mean_completeness=math.fsum(r.completeness for r in reports) / n,
        mean_total=math.fsum(r.total for r in reports) / n,
        summary=summary,
    )
