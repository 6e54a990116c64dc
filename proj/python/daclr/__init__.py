"""Event-aware evidence retrieval for fact checking.

Thin python surface over the C++ core: event-summary transforms, sparse and
dense retrieval, ranking metrics, and the adaptive contrastive training loop.
"""

from ._daclr import (
    CurvePoint,
    DaclrError,
    Dataset,
    DenseIndex,
    EncoderModel,
    EventSummary,
    SparseIndex,
    build_dense_index,
    compute_mid,
    cosine,
    cross_score,
    encode,
    fallback_extract,
    fuse_rankings,
    info_nce,
    load_corpus,
    loss_unit,
    mask_structure,
    mrr_at_k,
    ndcg_at_k,
    parse_response,
    recall,
    recall_at_k,
    render_prompt,
    retrieve,
    save_dataset,
    schedule,
    synth_dataset,
    tokenize,
    total_loss,
    train,
    update_ema,
    validate_summary,
    view,
)

__all__ = [
    "CurvePoint",
    "DaclrError",
    "Dataset",
    "DenseIndex",
    "EncoderModel",
    "EventSummary",
    "SparseIndex",
    "build_dense_index",
    "compute_mid",
    "cosine",
    "cross_score",
    "encode",
    "fallback_extract",
    "fuse_rankings",
    "info_nce",
    "load_corpus",
    "loss_unit",
    "mask_structure",
    "mrr_at_k",
    "ndcg_at_k",
    "parse_response",
    "recall",
    "recall_at_k",
    "render_prompt",
    "retrieve",
    "save_dataset",
    "schedule",
    "synth_dataset",
    "tokenize",
    "total_loss",
    "train",
    "update_ema",
    "validate_summary",
    "view",
]
