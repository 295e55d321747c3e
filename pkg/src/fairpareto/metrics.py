"""Identification-rank evaluation and group fairness metrics over embeddings.

A probe's rank is the number of gallery images of a *different* identity
that are strictly closer (euclidean) than its nearest same-identity mate;
an identification error is any rank > 0. Group metrics compare mean rank,
accuracy, and error rate between demographic groups.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from fairpareto.ranking import rank_counts

log = logging.getLogger(__name__)

METRICS = ("disparity", "rank_disparity", "ratio", "rank_ratio", "error_ratio")

MAX_PAIRWISE = "max-pairwise"


class MetricError(ValueError):
    pass


class EmbeddingSet:
    """Labeled feature vectors: one (image, identity, group, vector) per row."""

    def __init__(self, image_ids: Sequence[str], identities: Sequence[str],
                 groups: Sequence[str], vectors: np.ndarray):
        self.image_ids = [str(i) for i in image_ids]
        self.identities = np.asarray([str(i) for i in identities], dtype=object)
        self.groups = np.asarray([str(g) for g in groups], dtype=object)
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        n = len(self.image_ids)
        if n == 0:
            raise MetricError("embedding set is empty")
        if self.vectors.ndim != 2 or self.vectors.shape[0] != n:
            raise MetricError(
                f"expected ({n}, d) vector matrix, got shape {self.vectors.shape}"
            )
        if not (len(self.identities) == len(self.groups) == n):
            raise MetricError("field lengths disagree")
        if len(set(self.image_ids)) != n:
            raise MetricError("image_ids are not unique")
        if not np.isfinite(self.vectors).all():
            raise MetricError("vectors contain non-finite values")

    def __len__(self):
        return len(self.image_ids)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def group_names(self) -> list[str]:
        return sorted(set(self.groups.tolist()))

    @classmethod
    def from_records(cls, records) -> "EmbeddingSet":
        """records: iterable of (image_id, identity, group, vector)."""
        rows = list(records)
        if not rows:
            raise MetricError("embedding set is empty")
        ids, idents, groups, vecs = zip(*rows)
        return cls(ids, idents, groups, np.asarray(vecs, dtype=np.float64))

    @classmethod
    def from_csv(cls, path) -> "EmbeddingSet":
        """CSV with header image_id,identity,group,e0,...,e{d-1}."""
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MetricError(f"{path}: empty embedding file") from None
            for col in ("image_id", "identity", "group"):
                if col not in header:
                    raise MetricError(f"{path}: missing column {col!r}")
            dim_cols = [c for c in header if c.startswith("e")]
            expected = [f"e{i}" for i in range(len(dim_cols))]
            if not dim_cols or dim_cols != expected:
                raise MetricError(
                    f"{path}: embedding columns must be e0..e{{d-1}}, got {dim_cols}"
                )
            idx = {c: header.index(c) for c in header}
            ids, idents, groups, vecs = [], [], [], []
            for row in reader:
                if not row:
                    continue
                ids.append(row[idx["image_id"]])
                idents.append(row[idx["identity"]])
                groups.append(row[idx["group"]])
                vecs.append([float(row[idx[c]]) for c in dim_cols])
        if not ids:
            raise MetricError(f"{path}: no data rows")
        return cls(ids, idents, groups, np.asarray(vecs, dtype=np.float64))

    @classmethod
    def from_jsonl(cls, path) -> "EmbeddingSet":
        """JSON Lines with the same field names as the CSV form."""
        path = Path(path)
        ids, idents, groups, vecs = [], [], [], []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MetricError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
                try:
                    ids.append(str(doc["image_id"]))
                    idents.append(str(doc["identity"]))
                    groups.append(str(doc["group"]))
                except KeyError as exc:
                    raise MetricError(f"{path}:{lineno}: missing column {exc}") from exc
                d = 0
                vec = []
                while f"e{d}" in doc:
                    vec.append(float(doc[f"e{d}"]))
                    d += 1
                if not vec:
                    raise MetricError(f"{path}:{lineno}: missing column 'e0'")
                vecs.append(vec)
        if not ids:
            raise MetricError(f"{path}: no data rows")
        return cls(ids, idents, groups, np.asarray(vecs, dtype=np.float64))

    @classmethod
    def load(cls, path) -> "EmbeddingSet":
        path = Path(path)
        if path.suffix.lower() in (".jsonl", ".ndjson"):
            return cls.from_jsonl(path)
        return cls.from_csv(path)

    def write_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_id", "identity", "group"]
                            + [f"e{i}" for i in range(self.dimension)])
            for i, image_id in enumerate(self.image_ids):
                writer.writerow([image_id, self.identities[i], self.groups[i]]
                                + [repr(float(v)) for v in self.vectors[i]])


class ImageResult(NamedTuple):
    rank: int
    error: int
    excluded: bool


@dataclass
class GroupStats:
    mean_rank: float
    accuracy: float
    error_rate: float
    n: int


@dataclass
class IdentificationReport:
    image_ids: list[str]
    ranks: np.ndarray       # int64, 0 for excluded probes
    errors: np.ndarray      # int64 in {0,1}, 0 for excluded probes
    excluded: np.ndarray    # bool
    per_group: dict[str, GroupStats]

    @property
    def per_image(self) -> dict[str, ImageResult]:
        return {
            image_id: ImageResult(int(self.ranks[i]), int(self.errors[i]),
                                  bool(self.excluded[i]))
            for i, image_id in enumerate(self.image_ids)
        }

    @property
    def n_excluded(self) -> int:
        return int(self.excluded.sum())

    def overall_error_rate(self) -> float:
        scored = ~self.excluded
        if not scored.any():
            raise MetricError("every probe is excluded (no identity has a mate)")
        return float(self.errors[scored].mean())


def compute_ranks(embedding_set: EmbeddingSet) -> IdentificationReport:
    """Rank every probe against the remaining images as gallery.

    Probes whose identity has no second image are excluded and do not enter
    group statistics. Exact distance ties resolve in the probe's favor
    (only strictly closer non-mates count).
    """
    _, codes = np.unique(embedding_set.identities, return_inverse=True)
    ranks, excluded = rank_counts(embedding_set.vectors, codes.astype(np.int64))
    errors = (ranks > 0).astype(np.int64)
    errors[excluded] = 0

    per_group: dict[str, GroupStats] = {}
    for group in embedding_set.group_names():
        mask = (embedding_set.groups == group) & ~excluded
        n = int(mask.sum())
        if n == 0:
            log.warning("group %r has no scored probes; omitted from report", group)
            continue
        error_rate = float(errors[mask].mean())
        per_group[group] = GroupStats(
            mean_rank=float(ranks[mask].mean()),
            accuracy=1.0 - error_rate,
            error_rate=error_rate,
            n=n,
        )
    return IdentificationReport(
        image_ids=embedding_set.image_ids,
        ranks=ranks,
        errors=errors,
        excluded=excluded,
        per_group=per_group,
    )


@dataclass
class FairnessValue:
    metric: str
    value: float | None            # None marks an undefined ratio
    groups_compared: tuple[str, str] | str

    @property
    def defined(self) -> bool:
        return self.value is not None


def _ratio(numer: float, denom: float) -> float | None:
    if denom == 0.0:
        return None
    return abs(1.0 - numer / denom)


def fairness_metric(report: IdentificationReport, metric: str,
                    group_a: str, group_b: str) -> FairnessValue:
    """Pairwise group metric; the second group is the ratio denominator.

    Ratio metrics with a zero denominator yield an undefined value (None)
    instead of propagating infinities.
    """
    if metric not in METRICS:
        raise MetricError(f"unknown metric {metric!r} (choose from {METRICS})")
    for group in (group_a, group_b):
        if group not in report.per_group:
            raise MetricError(f"group {group!r} missing from report")
    a = report.per_group[group_a]
    b = report.per_group[group_b]
    if metric == "disparity":
        value = abs(a.accuracy - b.accuracy)
    elif metric == "rank_disparity":
        value = abs(a.mean_rank - b.mean_rank)
    elif metric == "ratio":
        value = _ratio(a.accuracy, b.accuracy)
    elif metric == "rank_ratio":
        value = _ratio(a.mean_rank, b.mean_rank)
    else:
        value = _ratio(a.error_rate, b.error_rate)
    return FairnessValue(metric, value, (group_a, group_b))


def multi_group_metric(report: IdentificationReport, metric: str,
                       groups: Sequence[str]) -> FairnessValue:
    """Worst (maximum) pairwise value over all unordered group pairs.

    Each pair keeps the orientation of the input list (earlier group is
    the ratio numerator). Undefined pairs are skipped; the result is
    undefined only when every pair is.
    """
    groups = list(groups)
    if len(groups) < 2:
        raise MetricError("multi-group metric needs at least 2 groups")
    best: float | None = None
    for i, a in enumerate(groups):
        for b in groups[i + 1:]:
            value = fairness_metric(report, metric, a, b).value
            if value is None:
                continue
            if best is None or value > best:
                best = value
    return FairnessValue(metric, best, MAX_PAIRWISE)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Pearson product-moment correlation; None when either side is constant."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 2:
        raise MetricError("pearson needs two equal-length series of length >= 2")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        return None
    rho = float((dx * dy).sum() / (sx * sy))
    return max(-1.0, min(1.0, rho))


def evaluate_fairness(embedding_set: EmbeddingSet, metrics: Sequence[str],
                      groups: tuple[str, str] | None = None,
                      multi_group: bool = False) -> dict[str, FairnessValue]:
    """Compute several metrics from one embedding set in a single pass."""
    report = compute_ranks(embedding_set)
    names = embedding_set.group_names()
    if len(report.per_group) < 2:
        raise MetricError(
            f"need at least two groups with scored probes, have {sorted(report.per_group)}"
        )
    out: dict[str, FairnessValue] = {}
    for metric in metrics:
        if multi_group:
            out[metric] = multi_group_metric(report, metric, list(report.per_group))
        else:
            a, b = groups if groups is not None else (names[0], names[1])
            out[metric] = fairness_metric(report, metric, a, b)
    return out
