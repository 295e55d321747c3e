"""Pareto-front extraction, 2-D hypervolume, and cross-seed aggregation.

All objectives are minimized. Dominance is weak dominance with at least
one strict improvement; duplicate non-dominated points are all retained.
"""
from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from fairpareto.records import STATUS_REPORTED, TrialRecord
from fairpareto.space import config_key

log = logging.getLogger(__name__)


class ParetoError(ValueError):
    pass


def _as_pair_of_rows(p, q) -> tuple[list[float], list[float]]:
    if isinstance(p, Mapping) or isinstance(q, Mapping):
        if not (isinstance(p, Mapping) and isinstance(q, Mapping)):
            raise ParetoError("cannot compare a named vector with a bare one")
        if set(p) != set(q):
            raise ParetoError(
                f"objective names differ: {sorted(p)} vs {sorted(q)}")
        names = sorted(p)
        return [float(p[k]) for k in names], [float(q[k]) for k in names]
    if len(p) != len(q):
        raise ParetoError(f"objective arity mismatch: {len(p)} vs {len(q)}")
    return [float(v) for v in p], [float(v) for v in q]


def dominates(p, q) -> bool:
    """True when p is no worse than q everywhere and better somewhere.

    Accepts two name->value mappings (names must match) or two equal-length
    sequences.
    """
    a, b = _as_pair_of_rows(p, q)
    strict = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def non_dominated_mask(points: np.ndarray) -> np.ndarray:
    """Boolean mask of points not dominated by any other point.

    Identical copies never dominate one another, so duplicates survive
    together.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ParetoError(f"expected (n, m) objective matrix, got {points.shape}")
    n = points.shape[0]
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        no_worse = (points <= points[i]).all(axis=1)
        better = (points < points[i]).any(axis=1)
        if (no_worse & better).any():
            mask[i] = False
    return mask


def pareto_front(points: Sequence[Sequence[float]],
                 payloads: Sequence | None = None):
    """Return the non-dominated subset, optionally pairing back payloads."""
    arr = np.asarray(list(points), dtype=np.float64)
    if arr.size == 0:
        return [] if payloads is None else ([], [])
    mask = non_dominated_mask(arr)
    front = [tuple(float(v) for v in row) for row in arr[mask]]
    if payloads is None:
        return front
    kept = [payloads[i] for i in range(len(payloads)) if mask[i]]
    return front, kept


def hypervolume2d(points: Sequence[Sequence[float]],
                  reference: Sequence[float]) -> float:
    """Area dominated by `points` and bounded above by `reference`.

    Every member must dominate the reference point; an empty set has
    hypervolume 0. Computed by a sort-and-sweep over f1.
    """
    if len(reference) != 2:
        raise ParetoError("hypervolume2d needs a 2-D reference point")
    ref1, ref2 = float(reference[0]), float(reference[1])
    pts = []
    for p in points:
        if len(p) != 2:
            raise ParetoError(f"expected 2-D points, got {tuple(p)}")
        f1, f2 = float(p[0]), float(p[1])
        if not dominates((f1, f2), (ref1, ref2)):
            raise ParetoError(
                f"point ({f1}, {f2}) does not dominate reference "
                f"({ref1}, {ref2})")
        pts.append((f1, f2))
    if not pts:
        return 0.0
    pts.sort()
    hv = 0.0
    prev_f2 = ref2
    for f1, f2 in pts:
        if f2 < prev_f2:
            hv += (ref1 - f1) * (prev_f2 - f2)
            prev_f2 = f2
    return hv


@dataclass
class AggregatedPoint:
    """Per-configuration objective means and standard errors across seeds."""
    config_key: str
    mean: dict[str, float]
    standard_error: dict[str, float]
    n_seeds: int

    def point(self, names: Sequence[str]) -> tuple[float, ...]:
        return tuple(self.mean[k] for k in names)


def _defined(record: TrialRecord) -> bool:
    return record.objectives is not None and all(
        v is not None for v in record.objectives.values())


def aggregate_seeds(trials: Sequence[TrialRecord],
                    at_fidelity: int) -> list[AggregatedPoint]:
    """Aggregate repeated evaluations of each configuration at one fidelity.

    Standard error is s/sqrt(n) with s the sample standard deviation, and
    0 for a single seed. Records with undefined objective values are
    excluded up front; configurations with no trial at the fidelity are
    skipped with a warning.
    """
    groups: dict[str, list[TrialRecord]] = {}
    dropped = 0
    for trial in trials:
        if trial.status != STATUS_REPORTED:
            continue
        if not _defined(trial):
            dropped += 1
            continue
        groups.setdefault(config_key(trial.config), []).append(trial)
    if dropped:
        log.warning("excluded %d records with undefined objective values",
                    dropped)
    out: list[AggregatedPoint] = []
    for key, members in groups.items():
        at = [t for t in members if t.fidelity == at_fidelity]
        if not at:
            log.warning("config %s has no trial at fidelity %d; skipped",
                        key, at_fidelity)
            continue
        names = sorted(at[0].objectives)
        for t in at[1:]:
            if sorted(t.objectives) != names:
                raise ParetoError(
                    f"config {key}: objective names differ across seeds")
        n = len(at)
        mean: dict[str, float] = {}
        stderr: dict[str, float] = {}
        for name in names:
            values = np.asarray([float(t.objectives[name]) for t in at])
            mean[name] = float(values.mean())
            stderr[name] = 0.0 if n == 1 \
                else float(values.std(ddof=1) / math.sqrt(n))
        out.append(AggregatedPoint(config_key=key, mean=mean,
                                   standard_error=stderr, n_seeds=n))
    return out


_FILTER_CLAUSE = re.compile(
    r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*<\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*$"
)


def parse_filter(expr: str) -> list[tuple[str, float]]:
    """Parse `name < number` clauses joined by `&&` into (name, bound) pairs."""
    clauses: list[tuple[str, float]] = []
    for part in expr.split("&&"):
        m = _FILTER_CLAUSE.match(part)
        if m is None:
            raise ParetoError(
                f"bad filter clause {part.strip()!r}; expected '<objective> < <number>'"
            )
        clauses.append((m.group(1), float(m.group(2))))
    return clauses


def passes_filter(objectives: Mapping[str, float | None],
                  clauses: Sequence[tuple[str, float]]) -> bool:
    """True when every named value is defined and below its bound."""
    for name, bound in clauses:
        if name not in objectives:
            raise ParetoError(f"filter references unknown objective {name!r}")
        value = objectives[name]
        if value is None or not value < bound:
            return False
    return True


def drop_undefined(points: Sequence[Sequence[float | None]],
                   payloads: Sequence | None = None):
    """Remove points with any undefined (None/NaN) objective before ranking."""
    keep: list[int] = []
    for i, p in enumerate(points):
        if all(v is not None and not math.isnan(v) for v in p):
            keep.append(i)
    if len(keep) != len(points):
        log.warning("excluded %d points with undefined objective values",
                    len(points) - len(keep))
    cleaned = [tuple(float(v) for v in points[i]) for i in keep]
    if payloads is None:
        return cleaned
    return cleaned, [payloads[i] for i in keep]


def front_csv_header(names: Sequence[str]) -> list[str]:
    header = ["config_key"]
    for name in names:
        header += [f"{name}_mean", f"{name}_stderr"]
    header += ["n_seeds", "on_front"]
    return header


def write_front_csv(fh, names: Sequence[str],
                    points: Sequence[AggregatedPoint],
                    on_front: Sequence[bool]) -> None:
    """Export rows as `config_key,<obj>_mean,<obj>_stderr,...,n_seeds,on_front`."""
    writer = csv.writer(fh)
    writer.writerow(front_csv_header(names))
    for point, flag in zip(points, on_front):
        row: list = [point.config_key]
        for name in names:
            row += [repr(point.mean[name]), repr(point.standard_error[name])]
        row += [point.n_seeds, "true" if flag else "false"]
        writer.writerow(row)


def write_front_csv_path(path, names: Sequence[str],
                         points: Sequence[AggregatedPoint],
                         on_front: Sequence[bool]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        write_front_csv(fh, names, points, on_front)
