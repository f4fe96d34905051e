"""Manifest JSON I/O and PNG helpers.

A manifest is a JSON array of records:

    {
      "image_id": "str",
      "width": int, "height": int,
      "aesthetic_score": float,        # optional
      "global_caption": "str",
      "entities": [
        {"id": int, "caption": "str",
         "mask": {"rle": [ints]} | {"label_png": "path"}}
      ]
    }

RLE masks are uncompressed row-major run lengths, zero-run first. Label-map
PNGs are 16-bit grayscale with pixel value = entity id, 0 = background;
paths resolve relative to the manifest file.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import LengthMismatchError, ManifestParseError
from .masks import EntitySpec, LayoutInstruction, Mask, decode_rle, encode_rle


@dataclass(frozen=True)
class DatasetRecord:
    """One image's manifest entry."""

    image_id: str
    width: int
    height: int
    global_caption: str
    entities: tuple[EntitySpec, ...] = field(default_factory=tuple)
    aesthetic_score: float | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ManifestParseError(
                f"{self.image_id}: dimensions must be >= 1, got {self.width}x{self.height}"
            )
        object.__setattr__(self, "entities", tuple(self.entities))

    def to_instruction(self) -> LayoutInstruction:
        return LayoutInstruction(
            image_width=self.width,
            image_height=self.height,
            global_caption=self.global_caption,
            entities=self.entities,
        )


def _parse_mask(spec, width: int, height: int, base_dir: Path, entity_id: int) -> Mask:
    if not isinstance(spec, dict):
        raise ManifestParseError(f"entity {entity_id}: mask must be an object")
    if "rle" in spec:
        return decode_rle(spec["rle"], width, height)
    if "label_png" in spec:
        labels = load_label_png(base_dir / spec["label_png"])
        if labels.shape != (height, width):
            raise ManifestParseError(
                f"entity {entity_id}: label map shape {labels.shape} != ({height}, {width})"
            )
        return labels == entity_id
    raise ManifestParseError(f"entity {entity_id}: mask needs 'rle' or 'label_png'")


def _parse_record(obj, base_dir: Path) -> DatasetRecord:
    try:
        width, height = int(obj["width"]), int(obj["height"])
        entities = []
        for e in obj.get("entities", []):
            entities.append(EntitySpec(
                id=int(e["id"]),
                caption=str(e["caption"]),
                mask=_parse_mask(e.get("mask"), width, height, base_dir, int(e["id"])),
            ))
        score = obj.get("aesthetic_score")
        return DatasetRecord(
            image_id=str(obj["image_id"]),
            width=width,
            height=height,
            global_caption=str(obj.get("global_caption", "")),
            entities=tuple(entities),
            aesthetic_score=None if score is None else float(score),
        )
    except ManifestParseError:
        raise
    except (KeyError, TypeError, ValueError, LengthMismatchError) as exc:
        raise ManifestParseError(f"bad record {obj.get('image_id', '?')!r}: {exc}") from exc


def load_manifest(path: str | Path) -> list[DatasetRecord]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
    if not isinstance(data, list):
        raise ManifestParseError(f"{path}: top level must be a JSON array of records")
    return [_parse_record(obj, path.parent) for obj in data]


def record_to_json(record: DatasetRecord) -> dict:
    """Serializable form; masks re-encoded as RLE."""
    obj = {
        "image_id": record.image_id,
        "width": record.width,
        "height": record.height,
        "global_caption": record.global_caption,
        "entities": [
            {"id": e.id, "caption": e.caption, "mask": {"rle": encode_rle(e.mask)}}
            for e in record.entities
        ],
    }
    if record.aesthetic_score is not None:
        obj["aesthetic_score"] = record.aesthetic_score
    return obj


def save_manifest(records: list[DatasetRecord], path: str | Path) -> None:
    Path(path).write_text(json.dumps([record_to_json(r) for r in records], indent=2))


# ---------------------------------------------------------------------------
# PNG helpers

def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Boolean map as an 8-bit grayscale PNG with values 0/255."""
    Image.fromarray(np.asarray(mask, dtype=bool).astype(np.uint8) * 255, mode="L").save(path)


def save_rgb_png(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="RGB").save(path)


def save_label_png(labels: np.ndarray, path: str | Path) -> None:
    """Integer label map as a 16-bit grayscale PNG."""
    arr = np.asarray(labels)
    if arr.min() < 0 or arr.max() > 0xFFFF:
        raise ValueError("labels must fit in uint16")
    Image.fromarray(arr.astype(np.uint16)).save(path)


def load_label_png(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img, dtype=np.int64)
    except OSError as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
