"""ParEGO-style scalarization of multi-objective costs.

Each suggestion draws a fresh weight vector from the uniform simplex,
normalizes observed objectives to [0, 1], and collapses them through an
augmented Chebyshev form so a single-output surrogate can be fit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

RHO = 0.05


class ScalarizeError(ValueError):
    pass


def sample_weights(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform draw from the standard k-simplex via sorted uniform spacings."""
    if k < 2:
        raise ScalarizeError(f"need at least two objectives to weight, got {k}")
    cuts = np.sort(rng.random(k - 1))
    bounds = np.concatenate(([0.0], cuts, [1.0]))
    return np.diff(bounds)


@dataclass(frozen=True)
class NormalizationState:
    """Per-objective min/max over history, applied as clamped min-max scaling."""

    names: tuple[str, ...]
    lows: tuple[float, ...]
    highs: tuple[float, ...]

    @classmethod
    def from_objectives(cls, rows: Sequence[Mapping[str, float]]
                        ) -> "NormalizationState":
        if not rows:
            raise ScalarizeError("cannot normalize an empty history")
        names = tuple(sorted(rows[0]))
        for row in rows:
            if tuple(sorted(row)) != names:
                raise ScalarizeError(
                    f"objective names disagree: {sorted(row)} vs {list(names)}"
                )
        lows = tuple(min(float(r[k]) for r in rows) for k in names)
        highs = tuple(max(float(r[k]) for r in rows) for k in names)
        return cls(names, lows, highs)

    def normalize(self, objectives: Mapping[str, float]) -> np.ndarray:
        """Scale to [0, 1] per objective; degenerate ranges collapse to 0."""
        out = np.empty(len(self.names))
        for i, name in enumerate(self.names):
            if name not in objectives:
                raise ScalarizeError(f"objective {name!r} missing from record")
            low, high = self.lows[i], self.highs[i]
            if high == low:
                out[i] = 0.0
            else:
                t = (float(objectives[name]) - low) / (high - low)
                out[i] = min(1.0, max(0.0, t))
        return out


def parego(normalized: Sequence[float] | np.ndarray,
           weights: Sequence[float] | np.ndarray,
           rho: float = RHO) -> float:
    """Augmented Chebyshev scalarization: max_j(w_j f_j) + rho * sum_j(w_j f_j)."""
    f = np.asarray(normalized, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if f.shape != w.shape:
        raise ScalarizeError(f"shape mismatch: {f.shape} vs {w.shape}")
    if f.size == 0:
        raise ScalarizeError("no objectives to scalarize")
    products = w * f
    return float(products.max() + rho * products.sum())


def scalarize_objectives(objectives: Mapping[str, float],
                         state: NormalizationState,
                         weights: np.ndarray,
                         rho: float = RHO) -> float:
    """Normalize a named objective dict and scalarize it.

    Weights pair with objectives in sorted-name order, so every caller sees
    a consistent weight-to-objective assignment.
    """
    if len(weights) != len(state.names):
        raise ScalarizeError(
            f"{len(weights)} weights for {len(state.names)} objectives"
        )
    return parego(state.normalize(objectives), weights, rho=rho)
