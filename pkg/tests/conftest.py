"""Shared fixtures: record builders, bundle directories, scripted backends."""

from __future__ import annotations

import base64
import json

import pytest

from dive.gateway import ModelResponse
from dive.records import MaterialRecord, Provenance
from dive.units import quantity_from_canonical

# 1x1 PNG, smallest useful stand-in for figure images
TINY_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNk"
    "YPhfDwAChwGA60e6kgAAAABJRU5ErkJggg=="
)

from dive.records import QUANTITY_FIELDS

# accept either the record attribute or the JSONL key name
_FIELD_LOOKUP = {}
for _attr, _key, _kind in QUANTITY_FIELDS:
    _FIELD_LOOKUP[_attr] = (_attr, _kind)
    _FIELD_LOOKUP[_key] = (_attr, _kind)


def build_record(formula="MgH2", doi="10.1000/demo", material_class=None,
                 mode="manual", status="pending", **quantities) -> MaterialRecord:
    """Record with quantities given as canonical numbers."""
    from dive.formula import FormulaError, parse_formula

    composition = None
    try:
        composition = parse_formula(formula)
    except FormulaError:
        pass
    fields = {}
    for name, value in quantities.items():
        attr, kind = _FIELD_LOOKUP[name]
        fields[attr] = quantity_from_canonical(float(value), kind)
    return MaterialRecord(
        formula_raw=formula,
        provenance=Provenance(doi=doi, extraction_mode=mode),
        composition=composition,
        material_class=material_class,
        review_status=status,
        **fields,
    )


@pytest.fixture
def record_factory():
    return build_record


def write_bundle(root, doi="10.1000/demo", title="Demo paper", year=2024,
                 body=None, figures=()):
    """Create a bundle directory; figures = [(id, caption, anchor)]."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "figures").mkdir(exist_ok=True)
    manifest_figures = []
    if body is None:
        body = "# Title\n\nIntro text about hydrogen storage.\n"
        for fig_id, caption, anchor in figures:
            body += f"\nParagraph before {fig_id}.\n{anchor}\nParagraph after {fig_id}.\n"
    for fig_id, caption, anchor in figures:
        image_name = f"{fig_id}.png"
        (root / "figures" / image_name).write_bytes(TINY_PNG)
        manifest_figures.append(
            {"id": fig_id, "image": image_name, "caption": caption, "anchor": anchor}
        )
    (root / "paper.md").write_text(body, "utf-8")
    (root / "figures.json").write_text(json.dumps({
        "doi": doi, "title": title, "year": year, "figures": manifest_figures,
    }), "utf-8")
    return root


@pytest.fixture
def bundle_factory(tmp_path):
    counter = {"n": 0}

    def make(**kwargs):
        counter["n"] += 1
        return write_bundle(tmp_path / f"bundle{counter['n']}", **kwargs)

    return make


class ScriptedBackend:
    """Backend stub: a handler maps each request to response text."""

    def __init__(self, handler):
        self.handler = handler
        self.calls = []
        self.tag = "scripted"

    def send(self, req):
        self.calls.append(req)
        out = self.handler(req)
        if isinstance(out, ModelResponse):
            return out
        return ModelResponse(text=out, token_usage=max(1, len(out) // 4), backend_tag=self.tag)


@pytest.fixture
def scripted_backend():
    return ScriptedBackend
