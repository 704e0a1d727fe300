# SPDX-License-Identifier: Apache-2.0
"""Self-supervised video pretraining against frozen per-frame image targets.

The heavy lifting lives in the compiled `_core` module; this package
re-exports its public surface.
"""

from vidistill._core import (
    augment_clip,
    base_lr,
    color_jitter,
    cosine_distance,
    default_config,
    emit_plots,
    evaluate,
    gaussian_blur,
    knn_classify,
    lr_at,
    make_synthetic_dataset,
    prediction_loss,
    pretrain,
    sample_clip,
    semi_split,
    temporal_pool,
)

__all__ = [
    "augment_clip",
    "base_lr",
    "color_jitter",
    "cosine_distance",
    "default_config",
    "emit_plots",
    "evaluate",
    "gaussian_blur",
    "knn_classify",
    "lr_at",
    "make_synthetic_dataset",
    "prediction_loss",
    "pretrain",
    "sample_clip",
    "semi_split",
    "temporal_pool",
]
