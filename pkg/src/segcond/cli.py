"""Command-line interface.

Exit codes: 0 success, 1 data/validation error, 2 usage error. All reports
are JSON (sorted keys) so repeated runs with the same inputs and seed are
byte-identical.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import attn_masks, evaluation, pipeline
from .attention import block_attention_weights, block_forward, gaussian, init_branch_params
from .attn_masks import AttentionMask, build_aia, build_saa, check_reachability, extend_with_condition
from .conditioning import build_bias, encode_contour, filter_tokens
from .errors import SegcondError
from .manifest import DatasetRecord, load_manifest, save_manifest, save_mask_png
from .masks import merge_contours, to_rgb
from .tokens import assign_labels, build_token_layout, caption_token_counts, patchify_labels, patchify_to_grid

GAMMA_LADDER = (0.01, 0.2, 0.5, 1.0)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# contour

def cmd_contour(args) -> int:
    records = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rec in records:
        gray = merge_contours(rec.to_instruction())
        save_mask_png(gray, out_dir / f"{rec.image_id}_contour.png")
    print(_dump({"written": len(records), "out_dir": str(out_dir)}))
    return 0


# ---------------------------------------------------------------------------
# masks

def _record_layout(rec: DatasetRecord, rows: int, cols: int):
    labels = assign_labels(rec.to_instruction())
    tokens = patchify_to_grid(labels, rows, cols)
    return build_token_layout(tokens, caption_token_counts(rec.to_instruction()))


def cmd_masks(args) -> int:
    records = load_manifest(args.manifest)
    if not records:
        print("empty manifest", file=sys.stderr)
        return 1
    rows, cols = (int(v) for v in args.grid.lower().split("x"))
    layout = _record_layout(records[args.index], rows, cols)
    mask = build_saa(layout) if args.kind == "saa" else build_aia(layout)
    report = check_reachability(mask)
    if not report.ok:
        print(f"unreachable queries: {list(report.unreachable)}", file=sys.stderr)
        return 1
    save_mask_png(mask.allowed, args.out)
    index = {
        "kind": args.kind,
        "size": mask.size,
        "T": [s.tolist() for s in layout.text_sets],
        "I": [(s - layout.L_text).tolist() for s in layout.image_sets],
    }
    Path(args.out).with_suffix(".json").write_text(_dump(index))
    print(_dump({"out": str(args.out), "size": mask.size}))
    return 0


# ---------------------------------------------------------------------------
# attend

def _mask_without_keys(mask: AttentionMask, key_cols: np.ndarray) -> AttentionMask:
    allowed = mask.allowed.copy()
    allowed[:, key_cols] = False
    return AttentionMask(size=mask.size, allowed=allowed)


def _condition_mass(weights: np.ndarray, n_text: int, n_img: int) -> float:
    """Attention mass image queries spend on condition keys, averaged."""
    img = slice(n_text, n_text + n_img)
    cnd = slice(n_text + n_img, None)
    on_cond = weights[:, img, cnd].sum()
    total = weights[:, img, :].sum()
    return float(on_cond / total) if total else 0.0


def _attend_record(rec: DatasetRecord, args) -> dict:
    instruction = rec.to_instruction()
    labels = assign_labels(instruction)
    tokens = patchify_labels(labels, args.downsample)
    layout = build_token_layout(tokens, caption_token_counts(instruction))

    contour_img = to_rgb(merge_contours(instruction))
    cond_full = encode_contour(contour_img, args.downsample, args.dim)
    cond = filter_tokens(cond_full) if not args.no_citf else cond_full

    params = init_branch_params(args.dim, args.heads, args.seed, rank=args.rank)
    text = gaussian(args.seed + 11, (layout.L_text, args.dim))
    image = gaussian(args.seed + 12, (layout.L_img, args.dim))
    image_positions = layout.image_positions()

    base = build_saa(layout)
    mask = extend_with_condition(base, len(cond))
    bias = build_bias(layout.L_text, layout.L_img, len(cond), args.gamma)

    weights = block_attention_weights(text, image, cond, image_positions, params, mask, bias)
    row_dev = float(np.abs(weights.sum(axis=-1) - 1.0).max())
    masked_max = float(weights[:, ~mask.allowed].max()) if (~mask.allowed).any() else 0.0

    gammas = sorted(set(GAMMA_LADDER) | {args.gamma})
    mass = {}
    for g in gammas:
        w = block_attention_weights(text, image, cond, image_positions, params,
                                    mask, build_bias(layout.L_text, layout.L_img, len(cond), g))
        mass[f"{g:g}"] = _condition_mass(w, layout.L_text, layout.L_img)

    # gamma=1 bias must be a no-op against the unbiased pass
    out_g1 = block_forward(text, image, cond, image_positions, params, mask,
                           build_bias(layout.L_text, layout.L_img, len(cond), 1.0))
    out_free = block_forward(text, image, cond, image_positions, params, mask, None)
    g1_delta = float(max(np.abs(a - b).max() for a, b in zip(out_g1[:2], out_free[:2])))

    # filtered pass vs unfiltered pass with the dropped keys boolean-masked
    filtered = filter_tokens(cond_full)
    mask_f = extend_with_condition(base, len(filtered))
    bias_f = build_bias(layout.L_text, layout.L_img, len(filtered), args.gamma)
    out_f = block_forward(text, image, filtered, image_positions, params, mask_f, bias_f)

    dropped = np.setdiff1d(cond_full.kept_indices, filtered.kept_indices)
    mask_u = _mask_without_keys(extend_with_condition(base, len(cond_full)),
                                layout.size + dropped)
    bias_u = build_bias(layout.L_text, layout.L_img, len(cond_full), args.gamma)
    out_u = block_forward(text, image, cond_full, image_positions, params, mask_u, bias_u)
    citf_delta = {
        "text": float(np.abs(out_f[0] - out_u[0]).max()),
        "image": float(np.abs(out_f[1] - out_u[1]).max()),
    }

    return {
        "image_id": rec.image_id,
        "n_text": layout.L_text,
        "n_img": layout.L_img,
        "n_cond_pre_filter": len(cond_full),
        "n_cond": len(cond),
        "row_sum_max_dev": row_dev,
        "masked_weight_max": masked_max,
        "condition_mass_per_gamma": mass,
        "gamma1_vs_unbiased_max_delta": g1_delta,
        "citf_equivalence_max_delta": citf_delta,
    }


def cmd_attend(args) -> int:
    records = load_manifest(args.manifest)
    reports = [_attend_record(rec, args) for rec in records]
    print(_dump({"seed": args.seed, "gamma": args.gamma, "records": reports}))
    tol = 1e-6
    for rep in reports:
        if rep["row_sum_max_dev"] > tol or rep["masked_weight_max"] != 0.0 \
                or rep["gamma1_vs_unbiased_max_delta"] > tol \
                or max(rep["citf_equivalence_max_delta"].values()) > tol:
            print(f"invariant breach on record {rep['image_id']}", file=sys.stderr)
            return 1
    return 0


# ---------------------------------------------------------------------------
# filter / miou / macs

def cmd_filter(args) -> int:
    records = load_manifest(args.manifest)
    accepted, summary = pipeline.run_pipeline(
        records, contour_dir=args.contour_dir,
        reject_missing_score=args.reject_missing_score)
    if args.out:
        save_manifest(accepted, args.out)
    print(_dump(summary))
    return 0


def cmd_miou(args) -> int:
    pred = {r.image_id: r for r in load_manifest(args.predicted)}
    ref = {r.image_id: r for r in load_manifest(args.reference)}
    rows = []
    for image_id in sorted(ref):
        if image_id not in pred:
            print(f"missing prediction for {image_id}", file=sys.stderr)
            return 1
        ref_entities = {e.id: e for e in ref[image_id].entities}
        pred_entities = {e.id: e for e in pred[image_id].entities}
        for eid in sorted(ref_entities):
            if eid not in pred_entities:
                print(f"{image_id}: missing prediction for entity {eid}", file=sys.stderr)
                return 1
            iou = evaluation.entity_iou(pred_entities[eid].mask, ref_entities[eid].mask)
            rows.append({"image_id": image_id, "entity_id": eid, "iou": iou})
    if not rows:
        print("no entities to score", file=sys.stderr)
        return 1
    mean = float(np.mean([r["iou"] for r in rows]))
    print(_dump({"entities": rows, "class_agnostic_miou": mean}))
    return 0


def cmd_macs(args) -> int:
    profile = evaluation.CostProfile(
        L_text=args.l_text, L_img=args.l_img, L_cond=args.l_cond,
        heads=args.heads, head_dim=args.head_dim, layers=args.layers)
    report = evaluation.citf_report(args.l_cond_pre if args.l_cond_pre is not None
                                    else max(args.l_cond, args.l_img),
                                    args.l_cond, profile)
    report["macs_at_l_cond"] = evaluation.attention_macs(profile)
    print(_dump(report))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segcond",
                                     description="Mask-conditioned attention toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("contour", help="write entity contour map PNGs per record")
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("masks", help="render an attention mask as PNG + JSON index sets")
    p.add_argument("manifest")
    p.add_argument("out")
    p.add_argument("--kind", choices=["saa", "aia"], required=True)
    p.add_argument("--grid", default="8x8", help="token grid as RxC")
    p.add_argument("--index", type=int, default=0, help="record index in the manifest")
    p.set_defaults(func=cmd_masks)

    p = sub.add_parser("attend", help="run the joint attention block and report invariants")
    p.add_argument("manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--downsample", type=int, default=16)
    # the patch encoder needs dim >= downsample**2
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--rank", type=int, default=4)
    p.add_argument("--no-citf", action="store_true", help="keep all-zero condition tokens")
    p.set_defaults(func=cmd_attend)

    p = sub.add_parser("filter", help="run the dataset curation filters")
    p.add_argument("manifest")
    p.add_argument("--out", help="path for the filtered manifest")
    p.add_argument("--contour-dir", help="write contour PNGs for accepted records")
    p.add_argument("--reject-missing-score", action="store_true")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("miou", help="class-agnostic mean IoU between two manifests")
    p.add_argument("predicted")
    p.add_argument("reference")
    p.set_defaults(func=cmd_miou)

    p = sub.add_parser("macs", help="analytic attention cost and filtering savings")
    p.add_argument("--l-text", type=int, default=evaluation.DEFAULT_L_TEXT)
    p.add_argument("--l-img", type=int, default=4096)
    p.add_argument("--l-cond", type=int, default=4096)
    p.add_argument("--l-cond-pre", type=int, default=None,
                   help="pre-filter condition token count (default: max(l_cond, l_img))")
    p.add_argument("--heads", type=int, default=24)
    p.add_argument("--head-dim", type=int, default=128)
    p.add_argument("--layers", type=int, default=attn_masks.DEFAULT_TOTAL_LAYERS)
    p.set_defaults(func=cmd_macs)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "gamma") and not (0.0 < args.gamma <= 1.0):
        print(f"--gamma must be in (0, 1], got {args.gamma}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except SegcondError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
