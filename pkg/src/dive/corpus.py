"""Converted-paper bundles: markdown body plus figure manifest.

A bundle directory contains `paper.md`, `figures.json`, and a `figures/`
subdirectory with the image files. Figure anchors are explicit tokens
declared in the manifest (typically the markdown image tag) and must occur
exactly once in the body, which makes splicing and context windows exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DiveError


class CorpusError(DiveError):
    pass


class MissingFile(CorpusError):
    pass


class MalformedManifest(CorpusError):
    pass


class AnchorNotFound(CorpusError):
    def __init__(self, figure_id: str, anchor: str):
        super().__init__(f"anchor for figure {figure_id!r} not found exactly once in body: {anchor!r}")
        self.figure_id = figure_id


class UnreadableImage(CorpusError):
    pass


class UnknownFigureId(CorpusError):
    pass


_IMAGE_MAGIC = (b"\x89PNG\r\n\x1a\n", b"\xff\xd8\xff")


@dataclass
class FigureAsset:
    id: str
    image_ref: str
    caption: str
    anchor: str

    def read_image(self) -> bytes:
        try:
            data = Path(self.image_ref).read_bytes()
        except OSError as exc:
            raise UnreadableImage(f"cannot read image {self.image_ref}: {exc}") from exc
        return data


@dataclass
class PaperBundle:
    doi: str
    title: str
    body: str
    figures: list[FigureAsset]
    year: int | None = None

    def figure(self, figure_id: str) -> FigureAsset:
        for fig in self.figures:
            if fig.id == figure_id:
                return fig
        raise UnknownFigureId(f"no figure {figure_id!r} in bundle {self.doi}")


def load_bundle(dir_path) -> PaperBundle:
    """Load and validate a bundle directory."""
    root = Path(dir_path)
    paper_path = root / "paper.md"
    manifest_path = root / "figures.json"
    for p in (paper_path, manifest_path):
        if not p.is_file():
            raise MissingFile(f"missing {p}")
    body = paper_path.read_text("utf-8")
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"{manifest_path}: {exc}") from exc
    if not isinstance(manifest, dict) or "doi" not in manifest:
        raise MalformedManifest(f"{manifest_path}: manifest must be an object with a doi")

    figures: list[FigureAsset] = []
    seen_ids = set()
    for entry in manifest.get("figures", []):
        try:
            fig = FigureAsset(
                id=str(entry["id"]),
                image_ref=str(root / "figures" / entry["image"]),
                caption=str(entry["caption"]),
                anchor=str(entry["anchor"]),
            )
        except (KeyError, TypeError) as exc:
            raise MalformedManifest(f"bad figure entry {entry!r}: {exc}") from exc
        if not fig.caption:
            raise MalformedManifest(f"figure {fig.id!r} has an empty caption")
        if fig.id in seen_ids:
            raise MalformedManifest(f"duplicate figure id {fig.id!r}")
        seen_ids.add(fig.id)
        if body.count(fig.anchor) != 1:
            raise AnchorNotFound(fig.id, fig.anchor)
        data = fig.read_image()
        if not data.startswith(_IMAGE_MAGIC):
            raise UnreadableImage(f"{fig.image_ref} is not a PNG or JPEG file")
        figures.append(fig)

    year = manifest.get("year")
    return PaperBundle(
        doi=str(manifest["doi"]),
        title=str(manifest.get("title") or ""),
        body=body,
        figures=figures,
        year=int(year) if year is not None else None,
    )


def context_window(bundle: PaperBundle, figure_id: str, radius: int) -> str:
    """Body text surrounding a figure anchor, `radius` characters on each
    side, clipped to the body and with the anchor removed."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    fig = bundle.figure(figure_id)
    start = bundle.body.index(fig.anchor)
    end = start + len(fig.anchor)
    before = bundle.body[max(0, start - radius):start]
    after = bundle.body[end:end + radius]
    return before + after


DEFAULT_CONTEXT_RADIUS = 1500
