"""Toy identification-model trainer speaking the search worker protocol.

A deliberately small but real training stack: searchable dual-path
convolution blocks, margin-softmax heads (CosFace / ArcFace / MagFace), a
procedural two-group image corpus, and a stdin/stdout worker that reports
{error, rank_disparity} at rung boundaries. It is driven entirely over the
wire; nothing here imports the search package.
"""
from .blocks import EMBED_DIM, OP_NAMES, EmbeddingNet, SearchableBlock, make_op
from .data import DATASET_SEED, GROUPS, ToyFaces, make_toy_faces
from .heads import HEAD_KINDS, HeadSpec, magnitude_margin, margin_loss

__all__ = [
    "EMBED_DIM",
    "OP_NAMES",
    "EmbeddingNet",
    "SearchableBlock",
    "make_op",
    "DATASET_SEED",
    "GROUPS",
    "ToyFaces",
    "make_toy_faces",
    "HEAD_KINDS",
    "HeadSpec",
    "magnitude_margin",
    "margin_loss",
    "__version__",
]

__version__ = "0.1.0"
