"""Cross-component acceptance gate.

Three criteria, one test each (the banner in conftest reports them):

1. Margin-loss gradients agree with central finite differences to 1e-4
   relative for all three heads on 4-sample batches, and the zero-margin
   losses equal plain normalized-softmax cross-entropy within 1e-6.
2. The worker's self-reported metrics equal the search package's
   evaluation of the exported embedding file: rank_disparity within 1e-9
   and per-probe ranks exactly.
3. A 20-trial orchestrated search over the real configuration space,
   driving the toy worker over the wire, finishes in under 30 minutes with
   a non-empty two-objective front and intact promotion quotas.

The search package is imported here, in the test harness only; the
trainer itself never touches it.
"""
from __future__ import annotations

import json
import subprocess
import time

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from fairpareto.backends import WorkerBackend
from fairpareto.metrics import EmbeddingSet, compute_ranks, fairness_metric
from fairpareto.search import SearchBudget, run_search
from fairpareto.space import get_space

from toytrainer.heads import HeadSpec, margin_loss
from toytrainer.worker import rank_probes

GRAD_RELATIVE_TOL = 1e-4
REDUCTION_TOL = 1e-6
DISPARITY_TOL = 1e-9
SEARCH_TIME_LIMIT_S = 1800.0


def _head_specs() -> list[HeadSpec]:
    return [HeadSpec("CosFace"), HeadSpec("ArcFace"), HeadSpec("MagFace")]


def _zero_margin(spec: HeadSpec) -> HeadSpec:
    if spec.kind == "MagFace":
        return HeadSpec(spec.kind, mag_margin_range=(0.0, 0.0))
    return HeadSpec(spec.kind, margin=0.0)


def test_margin_gradients():
    rng = np.random.default_rng(1234)
    batch, dim, classes = 4, 8, 5
    direction = rng.normal(size=(batch, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    # magnitudes strictly inside the MagFace range: no clamp kinks nearby
    embeddings = direction * rng.uniform(30.0, 80.0, size=(batch, 1))
    prototypes = rng.normal(size=(classes, dim))
    labels = torch.arange(batch)

    def loss_value(spec, e_arr, w_arr) -> float:
        return float(margin_loss(
            spec, torch.tensor(e_arr, dtype=torch.float64),
            torch.tensor(w_arr, dtype=torch.float64), labels))

    h = 1e-5
    for spec in _head_specs():
        e = torch.tensor(embeddings, dtype=torch.float64, requires_grad=True)
        w = torch.tensor(prototypes, dtype=torch.float64, requires_grad=True)
        margin_loss(spec, e, w, labels).backward()

        for base, grad, vary_embeddings in (
                (embeddings, e.grad.numpy(), True),
                (prototypes, w.grad.numpy(), False)):
            numeric = np.zeros_like(base)
            for idx in np.ndindex(base.shape):
                up, down = base.copy(), base.copy()
                up[idx] += h
                down[idx] -= h
                if vary_embeddings:
                    numeric[idx] = (loss_value(spec, up, prototypes)
                                    - loss_value(spec, down, prototypes)) / (2 * h)
                else:
                    numeric[idx] = (loss_value(spec, embeddings, up)
                                    - loss_value(spec, embeddings, down)) / (2 * h)
            relative = np.abs(grad - numeric) / np.maximum(np.abs(numeric), 1e-8)
            assert relative.max() <= GRAD_RELATIVE_TOL, (spec.kind, relative.max())

    # zero margin: every head collapses to normalized-softmax cross-entropy
    e64 = torch.tensor(embeddings, dtype=torch.float64)
    w64 = torch.tensor(prototypes, dtype=torch.float64)
    plain = F.cross_entropy(
        64.0 * (F.normalize(e64, dim=1) @ F.normalize(w64, dim=1).t()), labels)
    for spec in _head_specs():
        reduced = margin_loss(_zero_margin(spec), e64, w64, labels)
        assert abs(float(reduced) - float(plain)) <= REDUCTION_TOL, spec.kind


def test_cross_component_metric_agreement(worker_argv, tmp_path):
    exported = tmp_path / "final_embeddings.csv"
    start = json.dumps({
        "type": "start", "trial_id": "t0", "fidelity": 4, "seed": 123,
        "config": {"op1": "Conv3x3Bn", "op2": "BnConv1x1", "op3": "Conv1x1",
                   "head": "ArcFace", "optimizer": "Adam", "lr_adam": 0.003},
    })
    proc = subprocess.run(
        list(worker_argv) + ["--export-embeddings", str(exported)],
        input=start, capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    final = json.loads(proc.stdout.splitlines()[-1])
    assert final["type"] == "final"

    embedding_set = EmbeddingSet.from_csv(exported)
    report = compute_ranks(embedding_set)
    disparity = fairness_metric(report, "rank_disparity", "g0", "g1").value

    assert disparity is not None
    assert abs(final["objectives"]["rank_disparity"] - disparity) <= DISPARITY_TOL
    assert final["objectives"]["error"] == pytest.approx(
        report.overall_error_rate(), abs=DISPARITY_TOL)

    # the two implementations must agree probe by probe, not just on average
    ranks, excluded = rank_probes(embedding_set.vectors,
                                  list(embedding_set.identities))
    assert np.array_equal(ranks, report.ranks)
    assert np.array_equal(excluded, report.excluded)


def test_orchestrated_toy_search(worker_command, tmp_path):
    space = get_space("dpn_fair_v1")
    backend = WorkerBackend(worker_command)
    log_path = tmp_path / "toy_search.jsonl"

    started = time.monotonic()
    result = run_search(space, backend, SearchBudget(max_trials=20),
                        min_fidelity=25, max_fidelity=100, eta=2,
                        n_workers=1, seed=3, log_path=log_path)
    elapsed = time.monotonic() - started
    assert elapsed < SEARCH_TIME_LIMIT_S, f"search took {elapsed:.0f}s"

    assert len(result.history) == 20
    assert log_path.exists()

    reported = [r for r in result.history if r.status == "reported"]
    assert reported, "every toy trial failed"
    for record in reported:
        assert set(record.objectives) == {"error", "rank_disparity"}

    # a non-empty front over exactly the two wire objectives
    assert result.front
    assert result.objective_names == ("error", "rank_disparity")

    # scheduler invariants on the finished run
    by_fidelity = {f: [r for r in result.history if r.fidelity == f]
                   for f in (25, 50, 100)}
    assert {r.fidelity for r in result.history} <= {25, 50, 100}
    assert len(by_fidelity[50]) <= len(by_fidelity[25]) // 2
    assert len(by_fidelity[100]) <= len(by_fidelity[50]) // 2
    assert by_fidelity[50], "no promotions happened in 20 trials"

    # every promotion re-runs the same configuration with the same seed
    for upper, lower in ((100, 50), (50, 25)):
        for record in by_fidelity[upper]:
            assert any(r.config == record.config and r.seed == record.seed
                       for r in by_fidelity[lower]), record.trial_id
