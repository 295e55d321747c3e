"""Margin-based classification heads over an embedding space.

All three heads share one recipe: L2-normalize embeddings and class
prototypes, take cosine similarities, penalize the true-class logit with a
margin, scale by ``s``, then apply softmax cross-entropy. They differ only
in where the margin enters:

  CosFace   cos(theta_y) - m          (additive in cosine space)
  ArcFace   cos(theta_y + m)          (additive in angle space)
  MagFace   cos(theta_y + m(a))       (angular margin grows with the
                                       un-normalized embedding magnitude a)

With m = 0 every head degenerates to plain normalized-softmax
cross-entropy, which the tests rely on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

HEAD_KINDS = ("CosFace", "ArcFace", "MagFace")

# Keep |cos| strictly below 1 so the ArcFace sqrt(1 - cos^2) stays smooth.
_COS_CLAMP = 1.0 - 1e-7

DEFAULT_SCALE = 64.0
DEFAULT_COSFACE_MARGIN = 0.35
DEFAULT_ARCFACE_MARGIN = 0.5
DEFAULT_MAG_NORM_RANGE = (10.0, 110.0)
DEFAULT_MAG_MARGIN_RANGE = (0.45, 0.8)


@dataclass(frozen=True)
class HeadSpec:
    """Validated description of one margin head.

    ``margin`` applies to CosFace and ArcFace; when left as None it takes
    the head's published default. MagFace instead maps embedding magnitude
    linearly from ``mag_norm_range`` onto ``mag_margin_range``.
    """

    kind: str
    scale: float = DEFAULT_SCALE
    margin: float | None = None
    mag_norm_range: tuple[float, float] = DEFAULT_MAG_NORM_RANGE
    mag_margin_range: tuple[float, float] = DEFAULT_MAG_MARGIN_RANGE

    def __post_init__(self):
        if self.kind not in HEAD_KINDS:
            raise ValueError(f"unknown head {self.kind!r} (choose from {HEAD_KINDS})")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.margin is None:
            default = {"CosFace": DEFAULT_COSFACE_MARGIN,
                       "ArcFace": DEFAULT_ARCFACE_MARGIN,
                       "MagFace": 0.0}[self.kind]
            object.__setattr__(self, "margin", default)
        if not 0.0 <= self.margin <= 1.0:
            raise ValueError(f"margin must lie in [0, 1], got {self.margin}")
        lo_a, hi_a = self.mag_norm_range
        if not 0.0 < lo_a < hi_a:
            raise ValueError(f"bad magnitude range {self.mag_norm_range}")
        lo_m, hi_m = self.mag_margin_range
        if not (0.0 <= lo_m <= hi_m <= 1.0):
            raise ValueError(f"bad magnitude-margin range {self.mag_margin_range}")


def _angular_margin_logit(cos_target: torch.Tensor, m: torch.Tensor | float
                          ) -> torch.Tensor:
    """cos(theta + m) expanded so autograd differentiates through ``m``."""
    sin_target = torch.sqrt(torch.clamp(1.0 - cos_target * cos_target, min=0.0))
    if isinstance(m, torch.Tensor):
        return cos_target * torch.cos(m) - sin_target * torch.sin(m)
    return cos_target * math.cos(m) - sin_target * math.sin(m)


def magnitude_margin(spec: HeadSpec, magnitudes: torch.Tensor) -> torch.Tensor:
    """Per-sample MagFace margin: linear in the clipped embedding magnitude.

    Monotone non-decreasing, so larger (more confident) embeddings receive
    a larger angular penalty. Gradients flow through the magnitude.
    """
    lo_a, hi_a = spec.mag_norm_range
    lo_m, hi_m = spec.mag_margin_range
    a = torch.clamp(magnitudes, min=lo_a, max=hi_a)
    return lo_m + (hi_m - lo_m) * (a - lo_a) / (hi_a - lo_a)


def margin_logits(spec: HeadSpec, embeddings: torch.Tensor,
                  prototypes: torch.Tensor) -> torch.Tensor:
    """Scaled cosine logits with the margin already folded into every class.

    Returned as a (batch, classes) tensor of cos similarities; the margin is
    applied later, only to the true-class column (see ``margin_loss``).
    """
    e = F.normalize(embeddings, dim=1)
    w = F.normalize(prototypes, dim=1)
    return torch.clamp(e @ w.t(), min=-_COS_CLAMP, max=_COS_CLAMP)


def margin_loss(spec: HeadSpec, embeddings: torch.Tensor,
                prototypes: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean margin-softmax cross-entropy of a batch.

    embeddings: (B, D); prototypes: (C, D) learnable class directions;
    labels: (B,) int64 in [0, C). Works in float32 or float64.
    """
    if embeddings.ndim != 2 or prototypes.ndim != 2:
        raise ValueError("embeddings and prototypes must both be 2-D")
    if embeddings.shape[1] != prototypes.shape[1]:
        raise ValueError(
            f"dimension mismatch: embeddings {tuple(embeddings.shape)} vs "
            f"prototypes {tuple(prototypes.shape)}")
    n_classes = prototypes.shape[0]
    labels = labels.long()
    if labels.ndim != 1 or labels.shape[0] != embeddings.shape[0]:
        raise ValueError("labels must be one integer per embedding")
    if labels.numel() and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(
            f"label out of range: got {int(labels.min())}..{int(labels.max())} "
            f"for {n_classes} classes")

    cos = margin_logits(spec, embeddings, prototypes)
    rows = torch.arange(labels.shape[0], device=cos.device)
    cos_target = cos[rows, labels]

    if spec.kind == "CosFace":
        penalized = cos_target - spec.margin
    elif spec.kind == "ArcFace":
        penalized = _angular_margin_logit(cos_target, spec.margin)
    else:  # MagFace
        m = magnitude_margin(spec, torch.linalg.vector_norm(embeddings, dim=1))
        penalized = _angular_margin_logit(cos_target, m)

    logits = cos.clone()
    logits[rows, labels] = penalized
    return F.cross_entropy(spec.scale * logits, labels)
