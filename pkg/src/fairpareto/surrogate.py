"""Tree-ensemble cost model and expected-improvement suggestion.

A random forest regresses scalarized cost on (encoded config, normalized
fidelity); its across-tree spread doubles as the uncertainty estimate for
expected improvement. Mixed categorical/conditional spaces rule out the
usual Gaussian-process route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr
from sklearn.ensemble import RandomForestRegressor

from fairpareto.records import STATUS_REPORTED, highest_fidelity_per_config
from fairpareto.scalarize import (NormalizationState, sample_weights,
                                  scalarize_objectives)
from fairpareto.space import Configuration, SearchSpace

N_TREES = 64
MIN_LEAF = 3
MIN_HISTORY = 8
RANDOM_INTERLEAVE = 0.25
N_RANDOM_CANDIDATES = 1000
N_INCUMBENTS = 10
N_PERTURBATIONS = 10

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class SurrogateError(ValueError):
    pass


@dataclass
class CostModel:
    forest: RandomForestRegressor
    width: int

    def predict(self, x: Sequence[float]) -> tuple[float, float]:
        """Mean and across-tree sample variance at one input point."""
        row = np.asarray(x, dtype=np.float64).reshape(1, -1)
        if row.shape[1] != self.width:
            raise SurrogateError(
                f"input width {row.shape[1]} != training width {self.width}"
            )
        per_tree = np.array([t.predict(row)[0] for t in self.forest.estimators_])
        mean = float(per_tree.mean())
        var = float(per_tree.var(ddof=1)) if len(per_tree) > 1 else 0.0
        return mean, max(var, 0.0)

    def predict_batch(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.width:
            raise SurrogateError(
                f"expected (n, {self.width}) inputs, got {xs.shape}"
            )
        per_tree = np.stack([t.predict(xs) for t in self.forest.estimators_])
        means = per_tree.mean(axis=0)
        variances = per_tree.var(axis=0, ddof=1) if per_tree.shape[0] > 1 \
            else np.zeros(xs.shape[0])
        return means, np.maximum(variances, 0.0)


def fit(features: np.ndarray, costs: Sequence[float],
        rng: np.random.Generator) -> CostModel:
    """Fit the 64-tree forest; deterministic for a fixed rng state."""
    features = np.asarray(features, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise SurrogateError("training data must be a non-empty (n, w) matrix")
    if features.shape[0] != costs.shape[0]:
        raise SurrogateError(
            f"{features.shape[0]} feature rows vs {costs.shape[0]} costs"
        )
    if not (np.isfinite(features).all() and np.isfinite(costs).all()):
        raise SurrogateError("training data contains non-finite values")
    width = features.shape[1]
    forest = RandomForestRegressor(
        n_estimators=N_TREES,
        min_samples_leaf=MIN_LEAF,
        max_features=math.ceil(math.sqrt(width)),
        bootstrap=True,
        random_state=int(rng.integers(0, 2**31 - 1)),
    )
    forest.fit(features, costs)
    return CostModel(forest=forest, width=width)


def expected_improvement(mean: float, variance: float,
                         best_so_far: float) -> float:
    """EI for minimization; collapses to max(best - mean, 0) at zero spread."""
    if variance < 0:
        raise SurrogateError(f"negative variance {variance}")
    sigma = math.sqrt(variance)
    gap = best_so_far - mean
    if sigma == 0.0:
        return max(gap, 0.0)
    u = gap / sigma
    phi = math.exp(-0.5 * u * u) / _SQRT_2PI
    return gap * float(ndtr(u)) + sigma * phi


def suggest(history, space: SearchSpace, rng: np.random.Generator,
            rho: float = 0.05) -> Configuration:
    """Pick the next configuration to evaluate.

    Cold start (< 8 reported trials) and a 25% interleave fall back to
    random sampling; otherwise a fresh ParEGO weight scalarizes the
    history, a forest is fit on (encoding, fidelity fraction), and the
    argmax-EI candidate at the top observed fidelity wins (ties keep the
    first found).
    """
    completed = [r for r in history
                 if r.status == STATUS_REPORTED and r.objectives is not None
                 and all(v is not None for v in r.objectives.values())]
    if len(completed) < MIN_HISTORY:
        return space.sample(rng)
    if rng.random() < RANDOM_INTERLEAVE:
        return space.sample(rng)

    representatives = highest_fidelity_per_config(completed)
    state = NormalizationState.from_objectives(
        [r.objectives for r in representatives])
    weights = sample_weights(rng, len(state.names))
    max_fidelity = max(r.fidelity for r in completed)

    rows = []
    costs = []
    for record in completed:
        rows.append(np.concatenate([space.encode(record.config),
                                    [record.fidelity / max_fidelity]]))
        costs.append(scalarize_objectives(record.objectives, state, weights,
                                          rho=rho))
    model = fit(np.asarray(rows), costs, rng)
    best_so_far = min(c for record, c in zip(completed, costs)
                      if record.fidelity == max_fidelity)

    candidates = [space.sample(rng) for _ in range(N_RANDOM_CANDIDATES)]
    by_cost = sorted(zip(costs, range(len(completed))))
    seen = set()
    incumbents = []
    for _, i in by_cost:
        key_fields = tuple(sorted(completed[i].config.items()))
        if key_fields in seen:
            continue
        seen.add(key_fields)
        incumbents.append(completed[i].config)
        if len(incumbents) == N_INCUMBENTS:
            break
    for incumbent in incumbents:
        for _ in range(N_PERTURBATIONS):
            candidates.append(space.perturb(incumbent, rng))

    encoded = np.asarray(
        [np.concatenate([space.encode(c), [1.0]]) for c in candidates])
    means, variances = model.predict_batch(encoded)
    eis = np.asarray([expected_improvement(m, v, best_so_far)
                      for m, v in zip(means, variances)])
    return candidates[int(np.argmax(eis))]
