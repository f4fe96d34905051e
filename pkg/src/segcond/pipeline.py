"""Dataset curation filters: image-level gating, top-level mask retention,
area and count thresholds."""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .manifest import DatasetRecord, save_mask_png
from .masks import area_fraction, contains, merge_contours

MIN_SIDE = 1000
MAX_SIDE = 3000
MIN_ASPECT = 0.6
MAX_ASPECT = 1.8
MIN_AESTHETIC = 5.0
MIN_AREA_FRACTION = 0.01
MIN_MASKS = 1
MAX_MASKS = 20

STAGES = ("size", "aspect", "aesthetic", "mask_count")


@dataclass(frozen=True)
class FilterReport:
    """Outcome of filtering one record. accepted implies stage == 'none'."""

    accepted: bool
    stage: str
    reason: str
    retained_entity_ids: tuple[int, ...] = ()


def filter_image(rec: DatasetRecord, reject_missing_score: bool = False) -> FilterReport:
    """Gate on image size, aspect ratio, and aesthetic score. All thresholds
    are inclusive on the accept side."""
    if not (MIN_SIDE <= rec.width <= MAX_SIDE and MIN_SIDE <= rec.height <= MAX_SIDE):
        return FilterReport(False, "size", f"{rec.width}x{rec.height} outside "
                                           f"[{MIN_SIDE}, {MAX_SIDE}]")
    aspect = rec.width / rec.height
    if not (MIN_ASPECT <= aspect <= MAX_ASPECT):
        return FilterReport(False, "aspect", f"aspect {aspect:.3f} outside "
                                             f"[{MIN_ASPECT}, {MAX_ASPECT}]")
    if rec.aesthetic_score is None:
        if reject_missing_score:
            return FilterReport(False, "aesthetic", "missing aesthetic score")
    elif rec.aesthetic_score < MIN_AESTHETIC:
        return FilterReport(False, "aesthetic",
                            f"score {rec.aesthetic_score} below {MIN_AESTHETIC}")
    return FilterReport(True, "none", "ok", tuple(e.id for e in rec.entities))


def filter_masks(rec: DatasetRecord) -> FilterReport:
    """Keep top-level masks only, drop sub-1% masks, then gate on the
    surviving count.

    Containment pruning runs against the original entity set, so the result
    is independent of entity ordering.
    """
    entities = rec.entities
    top_level = [
        e for e in entities
        if not any(o.id != e.id and contains(o.mask, e.mask, strict=True)
                   for o in entities)
    ]
    retained = [e for e in top_level if area_fraction(e.mask) >= MIN_AREA_FRACTION]
    if not (MIN_MASKS <= len(retained) <= MAX_MASKS):
        return FilterReport(False, "mask_count",
                            f"{len(retained)} surviving masks outside "
                            f"[{MIN_MASKS}, {MAX_MASKS}]")
    return FilterReport(True, "none", "ok", tuple(e.id for e in retained))


def filter_record(rec: DatasetRecord, reject_missing_score: bool = False) -> FilterReport:
    report = filter_image(rec, reject_missing_score)
    if not report.accepted:
        return report
    return filter_masks(rec)


def run_pipeline(manifest: list[DatasetRecord], *, contour_dir: str | Path | None = None,
                 reject_missing_score: bool = False,
                 ) -> tuple[list[DatasetRecord], dict]:
    """Apply the image then mask filters per record, preserving input order.

    Accepted records carry only their retained entities. The summary counts
    rejections per stage; contour maps are optionally written per accepted
    record.
    """
    accepted: list[DatasetRecord] = []
    counts = {stage: 0 for stage in STAGES}
    for rec in manifest:
        report = filter_record(rec, reject_missing_score)
        if not report.accepted:
            counts[report.stage] += 1
            continue
        keep = set(report.retained_entity_ids)
        filtered = replace(rec, entities=tuple(e for e in rec.entities if e.id in keep))
        accepted.append(filtered)
        if contour_dir is not None:
            out = Path(contour_dir)
            out.mkdir(parents=True, exist_ok=True)
            gray = merge_contours(filtered.to_instruction())
            save_mask_png(gray, out / f"{filtered.image_id}_contour.png")
    summary = {
        "total": len(manifest),
        "accepted": len(accepted),
        "rejected": {stage: n for stage, n in counts.items()},
        "retained_entities": int(np.sum([len(r.entities) for r in accepted])) if accepted else 0,
    }
    return accepted, summary
