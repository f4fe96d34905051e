"""Mask-conditioned attention toolkit: layout geometry, attention masks,
shape conditioning, a forward-only attention block, dataset filters, and
evaluators."""

from .attention import (
    BranchParams,
    LoraAdapter,
    block_forward,
    init_branch_params,
    masked_attention,
    merge_lora,
    rope_2d,
)
from .attn_masks import (
    AttentionMask,
    LayerSchedule,
    MaskKind,
    build_aia,
    build_saa,
    check_reachability,
    extend_with_condition,
    make_schedule,
)
from .conditioning import (
    BiasMatrix,
    ConditionTokens,
    build_bias,
    encode_contour,
    filter_tokens,
)
from .evaluation import (
    CostProfile,
    MaskPairSet,
    attention_macs,
    citf_report,
    class_agnostic_miou,
    entity_iou,
)
from .manifest import DatasetRecord, load_manifest, save_manifest
from .masks import (
    EntitySpec,
    LayoutInstruction,
    area_fraction,
    contains,
    contour,
    decode_rle,
    encode_rle,
    merge_contours,
    to_rgb,
)
from .pipeline import FilterReport, filter_image, filter_masks, run_pipeline
from .tokens import (
    TokenLayout,
    assign_labels,
    build_token_layout,
    caption_token_counts,
    patchify_labels,
    patchify_to_grid,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
