"""Procedural two-group identification corpus.

Small enough to train on CPU in seconds, structured enough that embeddings
carry identity signal: every identity is a colored geometric glyph, every
image a nuisance-perturbed rendering of it. The two demographic groups get
different nuisance regimes (the second is noisier and jitters more), which
is what makes error rates and mean ranks drift apart between groups.

The corpus is a pure function of DATASET_SEED, never of the trial seed, so
every trial trains and evaluates on byte-identical data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

DATASET_SEED = 20240613

GROUPS = ("g0", "g1")
IDENTITIES_PER_GROUP = 8
IMAGES_PER_IDENTITY = 4
IMAGE_SIZE = 32
N_CLASSES = len(GROUPS) * IDENTITIES_PER_GROUP

# Nuisance regime per group; g1 is deliberately the harder population.
_NUISANCE = {
    "g0": dict(jitter=1, noise=0.03, brightness=0.05, background=0.85),
    "g1": dict(jitter=3, noise=0.16, brightness=0.30, background=0.35),
}

_N_SHAPES = 4


def _glyph_mask(kind: int, cy: float, cx: float, r: float,
                yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    if kind == 0:  # disk
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    if kind == 1:  # square
        return np.maximum(np.abs(yy - cy), np.abs(xx - cx)) <= r
    if kind == 2:  # diamond
        return np.abs(yy - cy) + np.abs(xx - cx) <= r
    d2 = (yy - cy) ** 2 + (xx - cx) ** 2  # ring
    return (d2 <= r * r) & (d2 >= (r - 2.5) ** 2)


@dataclass
class ToyFaces:
    """One rendered corpus: tensors for training, row metadata for scoring."""

    images: torch.Tensor        # (n, 3, IMAGE_SIZE, IMAGE_SIZE) float32
    labels: torch.Tensor        # (n,) int64 identity index in [0, N_CLASSES)
    image_ids: list[str]
    identities: list[str]
    groups: list[str]

    def __len__(self) -> int:
        return self.images.shape[0]


def make_toy_faces() -> ToyFaces:
    """Render the full corpus: 2 groups x 8 identities x 4 images."""
    rng = np.random.default_rng(DATASET_SEED)
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE].astype(np.float64)

    images, labels = [], []
    image_ids, identity_names, group_names = [], [], []
    for class_idx in range(N_CLASSES):
        group = GROUPS[class_idx // IDENTITIES_PER_GROUP]
        nuisance = _NUISANCE[group]
        # Stable identity appearance: glyph geometry plus two colors.
        kind = class_idx % _N_SHAPES
        cy, cx = rng.uniform(11.0, 21.0, size=2)
        radius = rng.uniform(5.0, 9.0)
        glyph_color = rng.uniform(0.2, 1.0, size=3)
        dot_cy, dot_cx = rng.uniform(6.0, 26.0, size=2)
        dot_color = rng.uniform(0.2, 1.0, size=3)

        for version in range(IMAGES_PER_IDENTITY):
            j = nuisance["jitter"]
            ey = cy + rng.integers(-j, j + 1)
            ex = cx + rng.integers(-j, j + 1)
            canvas = np.full((3, IMAGE_SIZE, IMAGE_SIZE),
                             nuisance["background"], dtype=np.float64)
            mask = _glyph_mask(kind, ey, ex, radius, yy, xx)
            dot = (yy - dot_cy) ** 2 + (xx - dot_cx) ** 2 <= 4.0
            for c in range(3):
                canvas[c][mask] = glyph_color[c]
                canvas[c][dot] = dot_color[c]
            canvas *= 1.0 + rng.uniform(-1.0, 1.0) * nuisance["brightness"]
            canvas += rng.normal(0.0, nuisance["noise"], size=canvas.shape)

            images.append(np.clip(canvas, 0.0, 1.0).astype(np.float32))
            labels.append(class_idx)
            image_ids.append(f"{group}_id{class_idx:02d}_v{version}")
            identity_names.append(f"id{class_idx:02d}")
            group_names.append(group)

    return ToyFaces(
        images=torch.from_numpy(np.stack(images)),
        labels=torch.tensor(labels, dtype=torch.int64),
        image_ids=image_ids,
        identities=identity_names,
        groups=group_names,
    )
