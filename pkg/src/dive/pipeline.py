"""Extraction pipelines over a paper bundle.

Direct mode: one extraction pass over the article body with the figure
images attached (images stay with the chunk containing their anchor when
the body has to be chunked).

Descriptive mode ("dive"): figure captions are triaged by a text model;
key figures (PCT, TPD, discharge) get a vision call that reads the curves
into a descriptive text block; the blocks replace the figure anchors in the
body; a text model then extracts records from the fully textual article.
"""

from __future__ import annotations

import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources

from .corpus import DEFAULT_CONTEXT_RADIUS, PaperBundle, UnknownFigureId, UnreadableImage, context_window
from .errors import DiveError
from .gateway import CassetteBackend, GatewayConfig, ModelRequest
from .records import EPOCH, MaterialRecord, Provenance, ValidationFailure, validate_record

FIGURE_CLASSES = ("pct", "tpd", "discharge", "other")
KEY_CLASSES = ("pct", "tpd", "discharge")


class ImageLoadError(DiveError):
    pass


class ChunkExtractionFailed(DiveError):
    def __init__(self, chunk_index: int, reason: str):
        super().__init__(f"chunk {chunk_index}: {reason}")
        self.chunk_index = chunk_index
        self.reason = reason


@dataclass
class FigureClass:
    label: str
    confidence: float

    def __post_init__(self):
        if self.label not in FIGURE_CLASSES:
            raise ValueError(f"bad figure class {self.label!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")

    @property
    def is_key(self) -> bool:
        return self.label in KEY_CLASSES


@dataclass
class DescriptiveBlock:
    figure_id: str
    label: FigureClass
    text: str


@dataclass
class ExtractionResult:
    records: list[MaterialRecord]
    failures: list[ValidationFailure]
    mode: str
    descriptive_blocks: list[DescriptiveBlock] = field(default_factory=list)
    token_usage: int = 0
    chunk_errors: list[ChunkExtractionFailed] = field(default_factory=list)
    spliced_text: str | None = None
    manifest: dict = field(default_factory=dict)


@dataclass
class PipelineConfig:
    models: GatewayConfig = field(default_factory=GatewayConfig)
    context_radius: int = DEFAULT_CONTEXT_RADIUS
    chunk_budget: int = 24_000
    chunk_overlap: int = 2_000
    max_tokens: int = 4096
    temperature: float = 0.0
    describe_workers: int = 4


def _template(name: str) -> str:
    return resources.files("dive").joinpath(f"prompts/{name}.txt").read_text("utf-8")


_TRIAGE_RE = re.compile(r"\b(PCT|TPD|DISCHARGE|OTHER)\b", re.IGNORECASE)
_CONF_RE = re.compile(r"\b(?:0?\.\d+|1\.0+|[01])\b")


def triage_caption(caption: str, backend, config: PipelineConfig | None = None) -> FigureClass:
    """One text call; anything unparseable degrades to (other, 0.0)."""
    config = config or PipelineConfig()
    if not caption:
        raise ValueError("caption must be non-empty")
    req = ModelRequest(
        kind="text",
        model_tag=config.models.model_text,
        user_prompt=_template("triage").format(caption=caption),
        max_tokens=64,
        temperature=config.temperature,
    )
    response = backend.send(req)
    text = response.text or ""
    label_match = _TRIAGE_RE.search(text)
    if not label_match:
        return FigureClass("other", 0.0)
    label = label_match.group(1).lower()
    conf_match = _CONF_RE.search(text[label_match.end():])
    confidence = float(conf_match.group(0)) if conf_match else 0.0
    return FigureClass(label, min(1.0, max(0.0, confidence)))


def describe_figure(bundle: PaperBundle, figure_id: str, fig_class: FigureClass,
                    backend, config: PipelineConfig | None = None) -> DescriptiveBlock:
    """One vision call with the image, caption, and surrounding text."""
    config = config or PipelineConfig()
    if not fig_class.is_key:
        raise ValueError("describe_figure is only for key figure classes")
    fig = bundle.figure(figure_id)
    try:
        image = fig.read_image()
    except (UnreadableImage, OSError) as exc:
        raise ImageLoadError(f"cannot load image {fig.image_ref}") from exc
    prompt = _template(f"describe_{fig_class.label}").format(
        caption=fig.caption,
        context=context_window(bundle, figure_id, config.context_radius),
    )
    response = backend.send(ModelRequest(
        kind="vision",
        model_tag=config.models.model_vision,
        user_prompt=prompt,
        images=[image],
        max_tokens=config.max_tokens,
        temperature=config.temperature,
    ))
    return DescriptiveBlock(figure_id=figure_id, label=fig_class, text=response.text or "")


def splice(bundle: PaperBundle, blocks: list[DescriptiveBlock]) -> str:
    """Replace every figure anchor: described figures become fenced data
    blocks, the rest become caption stubs. No anchor survives."""
    by_id: dict[str, DescriptiveBlock] = {}
    for block in blocks:
        if block.figure_id in by_id:
            raise ValueError(f"duplicate descriptive block for {block.figure_id!r}")
        bundle.figure(block.figure_id)  # raises UnknownFigureId
        by_id[block.figure_id] = block

    text = bundle.body
    for fig in bundle.figures:
        block = by_id.get(fig.id)
        if block is not None:
            replacement = (
                f"[FIGURE {fig.id} — EXTRACTED DATA]\n{block.text}\n[/FIGURE {fig.id}]"
            )
        else:
            replacement = f"[FIGURE {fig.id}: {fig.caption}]"
        text = text.replace(fig.anchor, replacement, 1)
    return text


def chunk_text(text: str, budget: int = 24_000, overlap: int = 2_000) -> list[str]:
    """Split long text into overlapping chunks, preferring heading starts."""
    if len(text) <= budget:
        return [text]
    headings = [m.start() for m in re.finditer(r"^#", text, flags=re.MULTILINE)]
    chunks = []
    start = 0
    while start < len(text):
        end = start + budget
        if end >= len(text):
            chunks.append(text[start:])
            break
        candidates = [h for h in headings if start + budget // 2 < h <= end]
        cut = max(candidates) if candidates else end
        chunks.append(text[start:cut])
        start = max(cut - overlap, start + 1)
    return chunks


_FENCE_RE = re.compile(r"```[a-zA-Z]*\n?(.*?)```", re.DOTALL)


def recover_json_array(text: str) -> list[dict]:
    """Lenient parse: direct, then fenced, then the outermost [...] slice.
    A single object is accepted as a one-element array."""
    def attempt(candidate: str):
        candidate = candidate.strip()
        if not candidate:
            return None
        try:
            value = json.loads(candidate)
        except json.JSONDecodeError:
            return None
        if isinstance(value, dict):
            return [value]
        if isinstance(value, list) and all(isinstance(v, dict) for v in value):
            return value
        return None

    parsed = attempt(text)
    if parsed is not None:
        return parsed
    for fence in _FENCE_RE.findall(text):
        parsed = attempt(fence)
        if parsed is not None:
            return parsed
    lo, hi = text.find("["), text.rfind("]")
    if 0 <= lo < hi:
        parsed = attempt(text[lo:hi + 1])
        if parsed is not None:
            return parsed
    raise ValueError("no JSON array of objects found in response")


def _dedup(records: list[MaterialRecord]) -> list[MaterialRecord]:
    seen = set()
    out = []
    for r in records:
        key = r.dedup_key()
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def extract_records(text: str, bundle: PaperBundle, backend, mode: str,
                    config: PipelineConfig | None = None,
                    provenance_timestamp: datetime | None = None) -> ExtractionResult:
    """Chunked extraction with one repair retry per chunk and dedup by
    (canonical formula, rounded conditions)."""
    config = config or PipelineConfig()
    if not text:
        raise ValueError("text must be non-empty")
    chunks = chunk_text(text, config.chunk_budget, config.chunk_overlap)

    attach_images = mode == "direct"
    model_tag = config.models.model_vision if attach_images else config.models.model_text
    timestamp = provenance_timestamp if provenance_timestamp is not None else _default_timestamp(backend)

    records: list[MaterialRecord] = []
    failures: list[ValidationFailure] = []
    chunk_errors: list[ChunkExtractionFailed] = []
    token_usage = 0
    used_figures: set[str] = set()

    for index, chunk in enumerate(chunks):
        images: list[bytes] = []
        if attach_images:
            for fig in bundle.figures:
                if fig.id not in used_figures and fig.anchor in chunk:
                    used_figures.add(fig.id)
                    try:
                        images.append(fig.read_image())
                    except (UnreadableImage, OSError) as exc:
                        raise ImageLoadError(f"cannot load image {fig.image_ref}") from exc
        prompt = _template("extract").format(text=chunk)
        request = ModelRequest(
            kind="vision" if images else "text",
            model_tag=model_tag,
            user_prompt=prompt,
            images=images,
            max_tokens=config.max_tokens,
            temperature=config.temperature,
        )
        response = backend.send(request)
        token_usage += response.token_usage
        raw_items = None
        try:
            raw_items = recover_json_array(response.text or "")
        except ValueError as exc:
            repair = ModelRequest(
                kind="text",
                model_tag=config.models.model_text,
                user_prompt=_template("repair").format(error=str(exc), previous=response.text or ""),
                max_tokens=config.max_tokens,
                temperature=config.temperature,
            )
            retry = backend.send(repair)
            token_usage += retry.token_usage
            try:
                raw_items = recover_json_array(retry.text or "")
            except ValueError as exc2:
                chunk_errors.append(ChunkExtractionFailed(index, str(exc2)))
                continue
        prov = Provenance(doi=bundle.doi, extraction_mode=mode, model_tag=model_tag,
                          timestamp=timestamp)
        for item in raw_items:
            result = validate_record(item, provenance=prov)
            if isinstance(result, ValidationFailure):
                failures.append(result)
            else:
                records.append(result)

    return ExtractionResult(
        records=_dedup(records),
        failures=failures,
        mode=mode,
        token_usage=token_usage,
        chunk_errors=chunk_errors,
    )


def _default_timestamp(backend) -> datetime:
    # replayed runs are reproductions: pin the epoch so output bytes are stable
    if isinstance(backend, CassetteBackend) and backend.mode == "replay":
        return EPOCH
    return datetime.now(timezone.utc)


def run(bundle: PaperBundle, backend, mode: str,
        config: PipelineConfig | None = None,
        provenance_timestamp: datetime | None = None) -> ExtractionResult:
    """Full extraction over one bundle in `direct` or `dive` mode."""
    config = config or PipelineConfig()
    if mode not in ("direct", "dive"):
        raise ValueError(f"bad mode {mode!r}")
    timings: dict[str, float] = {}
    started = time.perf_counter()

    if mode == "direct":
        result = extract_records(bundle.body, bundle, backend, "direct", config,
                                 provenance_timestamp=provenance_timestamp)
        timings["extract"] = time.perf_counter() - started
    else:
        triaged: list[tuple[str, FigureClass]] = []
        for fig in bundle.figures:
            triaged.append((fig.id, triage_caption(fig.caption, backend, config)))
        timings["triage"] = time.perf_counter() - started

        step = time.perf_counter()
        key_figures = [(fid, cls) for fid, cls in triaged if cls.is_key]
        if key_figures:
            workers = max(1, min(config.describe_workers, len(key_figures)))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                blocks = list(pool.map(
                    lambda item: describe_figure(bundle, item[0], item[1], backend, config),
                    key_figures,
                ))
        else:
            blocks = []
        timings["describe"] = time.perf_counter() - step

        step = time.perf_counter()
        spliced = splice(bundle, blocks)
        timings["splice"] = time.perf_counter() - step

        step = time.perf_counter()
        result = extract_records(spliced, bundle, backend, "dive", config,
                                 provenance_timestamp=provenance_timestamp)
        timings["extract"] = time.perf_counter() - step
        result.descriptive_blocks = blocks
        result.spliced_text = spliced

    result.manifest = {
        "doi": bundle.doi,
        "mode": mode,
        "models": {
            "text": config.models.model_text,
            "vision": config.models.model_vision,
        },
        "token_usage": result.token_usage,
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
        "n_records": len(result.records),
        "n_failures": len(result.failures),
        "n_chunk_errors": len(result.chunk_errors),
        "descriptive_blocks": [
            {
                "figure_id": b.figure_id,
                "class": b.label.label,
                "confidence": b.label.confidence,
                "text": b.text,
            }
            for b in result.descriptive_blocks
        ],
    }
    return result
