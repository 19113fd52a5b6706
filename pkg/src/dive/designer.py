"""Inverse design: propose candidate compositions, verify against the
capacity predictor and the record store, iterate with feedback.

Engines are pluggable: an LLM engine drafts candidates from a prompt
embedding the constraints, database context, and prior-round feedback; the
enumerative fallback walks a deterministic stoichiometry grid over the
element pool and never repeats a composition. Temperature and pressure
windows are reported in verdict feedback but not machine-checked: the
predictor scores capacity only.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations, product
from pathlib import Path

from .elements import is_element
from .errors import DiveError
from .formula import FormulaError, canonical_formula, parse_formula
from .gateway import ModelRequest
from .predictor import GBDTModel
from .predictor import predict as predict_capacity

logger = logging.getLogger(__name__)


class EmptyProposal(DiveError):
    pass


@dataclass
class DesignSpec:
    element_pool: list[str]
    min_capacity: float
    material_class: str | None = None
    temperature_window: tuple[float, float] | None = None
    pressure_window: tuple[float, float] | None = None
    require_novel: bool = False
    max_iterations: int = 5
    candidates_per_round: int = 5

    def __post_init__(self):
        self.element_pool = sorted(dict.fromkeys(self.element_pool))
        if not self.element_pool:
            raise ValueError("element pool must be non-empty")
        for sym in self.element_pool:
            if not is_element(sym):
                raise ValueError(f"unknown element {sym!r} in pool")
        if not 0 < self.min_capacity < 100:
            raise ValueError("min_capacity must be in (0, 100) wt.%")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.candidates_per_round < 1:
            raise ValueError("candidates_per_round must be >= 1")
        for window in (self.temperature_window, self.pressure_window):
            if window is not None and window[0] > window[1]:
                raise ValueError("window bounds must satisfy lo <= hi")

    def to_dict(self) -> dict:
        return {
            "element_pool": self.element_pool,
            "min_capacity": self.min_capacity,
            "material_class": self.material_class,
            "temperature_window": list(self.temperature_window) if self.temperature_window else None,
            "pressure_window": list(self.pressure_window) if self.pressure_window else None,
            "require_novel": self.require_novel,
            "max_iterations": self.max_iterations,
            "candidates_per_round": self.candidates_per_round,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpec":
        return cls(
            element_pool=list(d["element_pool"]),
            min_capacity=float(d["min_capacity"]),
            material_class=d.get("material_class"),
            temperature_window=tuple(d["temperature_window"]) if d.get("temperature_window") else None,
            pressure_window=tuple(d["pressure_window"]) if d.get("pressure_window") else None,
            require_novel=bool(d.get("require_novel", False)),
            max_iterations=int(d.get("max_iterations", 5)),
            candidates_per_round=int(d.get("candidates_per_round", 5)),
        )

    @classmethod
    def from_file(cls, path) -> "DesignSpec":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


def doe_2030_spec(element_pool: list[str], **overrides) -> DesignSpec:
    """Named preset for the on-board storage targets: at least 5.5 wt.%
    deliverable between -40 and 85 C."""
    base = dict(
        element_pool=element_pool,
        min_capacity=5.5,
        temperature_window=(233.15, 358.15),
        require_novel=True,
    )
    base.update(overrides)
    return DesignSpec(**base)


@dataclass
class Verdict:
    formula: str
    parsed: bool
    in_pool: bool
    predicted_capacity: float | None
    novel: bool | None
    meets_targets: bool
    feedback: str

    def to_dict(self) -> dict:
        return {
            "formula": self.formula,
            "parsed": self.parsed,
            "in_pool": self.in_pool,
            "predicted_capacity": self.predicted_capacity,
            "novel": self.novel,
            "meets_targets": self.meets_targets,
            "feedback": self.feedback,
        }


@dataclass
class DesignIteration:
    candidates: list[tuple[str, str]]
    verdicts: list[Verdict]


@dataclass
class DesignTrace:
    spec: DesignSpec
    iterations: list[DesignIteration] = field(default_factory=list)
    outcome: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "outcome": self.outcome,
            "iterations": [
                {
                    "candidates": [{"formula": f, "rationale": r} for f, r in it.candidates],
                    "verdicts": [v.to_dict() for v in it.verdicts],
                }
                for it in self.iterations
            ],
        }

    def markdown_report(self) -> str:
        lines = ["# Design run", ""]
        lines.append(f"- element pool: {', '.join(self.spec.element_pool)}")
        lines.append(f"- capacity target: >= {self.spec.min_capacity} wt.%")
        if self.spec.temperature_window:
            lo, hi = self.spec.temperature_window
            lines.append(f"- temperature window: {lo}-{hi} K (reviewed via feedback, not predicted)")
        lines.append("")
        for n, it in enumerate(self.iterations, start=1):
            lines.append(f"## Round {n}")
            for v in it.verdicts:
                mark = "PASS" if v.meets_targets else "fail"
                pred = f"{v.predicted_capacity:.2f} wt.%" if v.predicted_capacity is not None else "-"
                lines.append(f"- [{mark}] {v.formula}: {pred} ({v.feedback})")
            lines.append("")
        if self.outcome.get("status") == "success":
            lines.append(
                f"**Selected {self.outcome['candidate']} at "
                f"{self.outcome['predicted_capacity']:.2f} wt.% predicted.**"
            )
        else:
            lines.append("**No candidate met every target within the iteration budget.**")
        return "\n".join(lines) + "\n"


def _fmt_amount(v: float) -> str:
    return f"{round(v, 6):g}"


def fallback_candidates(pool: list[str]):
    """Deterministic stoichiometry grid over the pool, coarse to fine:
    single elements; binary and ternary ratio grids over {1,2,3}; then
    10/20/30% substitutions of one site of each binary. Canonical
    duplicates are skipped."""
    pool = sorted(dict.fromkeys(pool))
    seen: set[str] = set()

    def emit(formula: str, rationale: str):
        try:
            key = canonical_formula(parse_formula(formula))
        except FormulaError:
            return None
        if key in seen:
            return None
        seen.add(key)
        return formula, rationale

    for el in pool:
        item = emit(el, "single element")
        if item:
            yield item
    ratios = (1, 2, 3)
    for a, b in combinations(pool, 2):
        for x, y in product(ratios, ratios):
            item = emit(f"{a}{x}{b}{y}", f"binary grid {a}:{b} = {x}:{y}")
            if item:
                yield item
    for a, b, c in combinations(pool, 3):
        for x, y, z in product(ratios, ratios, ratios):
            item = emit(f"{a}{x}{b}{y}{c}{z}", f"ternary grid {a}:{b}:{c} = {x}:{y}:{z}")
            if item:
                yield item
    for a, b in combinations(pool, 2):
        for x, y in product(ratios, ratios):
            for sub in pool:
                if sub in (a, b):
                    continue
                for f in (0.1, 0.2, 0.3):
                    item = emit(
                        f"{a}{_fmt_amount(x * (1 - f))}{sub}{_fmt_amount(x * f)}{b}{y}",
                        f"substitute {int(f * 100)}% of {a} by {sub} in {a}{x}{b}{y}",
                    )
                    if item:
                        yield item
                    item = emit(
                        f"{a}{x}{b}{_fmt_amount(y * (1 - f))}{sub}{_fmt_amount(y * f)}",
                        f"substitute {int(f * 100)}% of {b} by {sub} in {a}{x}{b}{y}",
                    )
                    if item:
                        yield item


class FallbackEngine:
    """Enumerative proposal engine; never repeats across rounds."""

    def __init__(self, spec: DesignSpec):
        self._generator = fallback_candidates(spec.element_pool)

    def propose(self, spec: DesignSpec, round_index: int, history: list[str],
                context: list[str]) -> list[tuple[str, str]]:
        out = []
        for _ in range(spec.candidates_per_round):
            try:
                out.append(next(self._generator))
            except StopIteration:
                break
        return out


_CANDIDATE_LINE = re.compile(r"^[\s\-\*\d\.\)]*([A-Za-z0-9\.\(\)\[\]]+)\s*(?:\|\s*(.*))?$")


class LlmEngine:
    """Prompted proposal engine; unparseable lines are dropped with a log."""

    def __init__(self, backend, model_tag: str, max_tokens: int = 2048):
        self.backend = backend
        self.model_tag = model_tag
        self.max_tokens = max_tokens

    def propose(self, spec: DesignSpec, round_index: int, history: list[str],
                context: list[str]) -> list[tuple[str, str]]:
        extra = []
        if spec.temperature_window:
            lo, hi = spec.temperature_window
            extra.append(f"- operating temperature window: {lo} to {hi} K")
        if spec.pressure_window:
            lo, hi = spec.pressure_window
            extra.append(f"- operating pressure window: {lo} to {hi} bar")
        if spec.require_novel:
            extra.append("- compositions must not already exist in the database")
        history_text = ""
        if history:
            history_text = "Feedback on the previous round:\n" + "\n".join(f"- {h}" for h in history)
        prompt = resources.files("dive").joinpath("prompts/design_propose.txt").read_text("utf-8").format(
            element_pool=", ".join(spec.element_pool),
            material_class=spec.material_class or "any",
            min_capacity=spec.min_capacity,
            extra_requirements="\n".join(extra),
            context="\n".join(context) if context else "(no database context)",
            history=history_text,
            n_candidates=spec.candidates_per_round,
        )
        response = self.backend.send(ModelRequest(
            kind="text", model_tag=self.model_tag, user_prompt=prompt,
            max_tokens=self.max_tokens, temperature=0.0,
        ))
        candidates = []
        for line in (response.text or "").splitlines():
            line = line.strip()
            if not line:
                continue
            m = _CANDIDATE_LINE.match(line)
            if not m:
                logger.info("discarding proposal line without a formula: %r", line)
                continue
            formula, rationale = m.group(1), (m.group(2) or "").strip()
            try:
                parse_formula(formula)
            except FormulaError as exc:
                logger.info("discarding unparseable proposal %r: %s", formula, exc)
                continue
            candidates.append((formula, rationale))
        if not candidates:
            raise EmptyProposal(f"round {round_index}: no parseable candidates in response")
        return candidates


def retrieve_context(store, spec: DesignSpec, limit: int = 20) -> list[str]:
    """Database context rows ranked by shared-element count, then capacity."""
    if store is None:
        return []
    scored = []
    pool = set(spec.element_pool)
    for rid, r in store.records():
        if r.composition is None:
            continue
        shared = len(pool & r.composition.elements())
        if shared == 0:
            continue
        cap = r.capacity_wt_pct.canonical_value if r.capacity_wt_pct else None
        scored.append((-shared, -(cap if cap is not None else -1.0), rid, r, cap))
    scored.sort(key=lambda t: (t[0], t[1], t[2]))
    rows = []
    for _, _, rid, r, cap in scored[:limit]:
        parts = [r.formula_raw]
        parts.append(f"{cap:g} wt.%" if cap is not None else "capacity n/a")
        temp = r.measurement_temperature or r.desorption_temperature
        if temp is not None:
            parts.append(f"{temp.canonical_value:g} K")
        rows.append(" | ".join(parts))
    return rows


def verify(candidate: str, spec: DesignSpec, model: GBDTModel, store=None) -> Verdict:
    """Check one candidate: parse, pool membership, predicted capacity,
    novelty. The feedback names the first failing check or the margin."""
    window_note = ""
    if spec.temperature_window or spec.pressure_window:
        window_note = "; operating window not machine-checked"
    try:
        composition = parse_formula(candidate)
    except FormulaError as exc:
        return Verdict(candidate, False, False, None, None, False, f"formula does not parse: {exc}")

    pool = set(spec.element_pool)
    outside = sorted(composition.elements() - pool)
    if outside:
        return Verdict(candidate, True, False, None, None, False,
                       f"element {outside[0]} outside allowed pool {{{', '.join(spec.element_pool)}}}")

    predicted = predict_capacity(model, composition)

    novel: bool | None = None
    if spec.require_novel:
        novel = store is None or not store.has_canonical_formula(canonical_formula(composition))
        if not novel:
            return Verdict(candidate, True, True, predicted, False, False,
                           "composition already present in the database")

    if predicted < spec.min_capacity:
        return Verdict(candidate, True, True, predicted, novel, False,
                       f"predicted {predicted:.2f} wt.% below target {spec.min_capacity:g} wt.%")

    return Verdict(candidate, True, True, predicted, novel, True,
                   f"predicted {predicted:.2f} wt.% meets target {spec.min_capacity:g} wt.% "
                   f"(margin +{predicted - spec.min_capacity:.2f}){window_note}")


def run_design(spec: DesignSpec, engine, model: GBDTModel, store=None) -> DesignTrace:
    """Iterate propose -> verify until a candidate passes every enabled
    check or the iteration budget is exhausted. The trace records every
    candidate and verdict; no canonical formula is visited twice."""
    trace = DesignTrace(spec=spec)
    seen: set[str] = set()
    history: list[str] = []
    reserve: FallbackEngine | None = None
    context = retrieve_context(store, spec)

    def dedup_key(formula: str) -> str:
        try:
            return canonical_formula(parse_formula(formula))
        except FormulaError:
            return f"raw:{formula.strip()}"

    for round_index in range(1, spec.max_iterations + 1):
        try:
            proposed = engine.propose(spec, round_index, history, context)
        except EmptyProposal:
            proposed = []
        fresh = []
        for formula, rationale in proposed:
            key = dedup_key(formula)
            if key in seen:
                continue
            seen.add(key)
            fresh.append((formula, rationale))
        if not fresh:
            if reserve is None:
                reserve = FallbackEngine(spec)
            for formula, rationale in reserve.propose(spec, round_index, history, context):
                key = dedup_key(formula)
                if key not in seen:
                    seen.add(key)
                    fresh.append((formula, rationale))
        if not fresh:
            break  # both engines exhausted

        verdicts = [verify(formula, spec, model, store) for formula, _ in fresh]
        trace.iterations.append(DesignIteration(candidates=fresh, verdicts=verdicts))

        winners = [v for v in verdicts if v.meets_targets]
        if winners:
            best = min(winners, key=lambda v: (-v.predicted_capacity, dedup_key(v.formula)))
            trace.outcome = {
                "status": "success",
                "candidate": best.formula,
                "predicted_capacity": best.predicted_capacity,
                "rounds": round_index,
            }
            return trace
        history = [v.feedback for v in verdicts]

    trace.outcome = {"status": "budget_exhausted", "rounds": len(trace.iterations)}
    return trace
