"""Line-protocol training worker.

Reads exactly one ``start`` message (JSON object per line) on stdin:

    {"type": "start", "trial_id": "t17", "config": {...},
     "fidelity": 50, "seed": 3}

then trains a searchable embedding network on the built-in toy corpus for
``fidelity`` epochs and answers on stdout with ``progress`` messages at
every 25-epoch boundary below the target and one ``final`` message at the
target. Objectives are computed here, from scratch, on this worker's own
embeddings: overall identification ``error`` and the between-group
``rank_disparity``. Any malformed input or training crash produces a
``fail`` message and a nonzero exit code.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .blocks import EMBED_DIM, EmbeddingNet
from .data import GROUPS, N_CLASSES, ToyFaces, make_toy_faces
from .heads import HeadSpec, margin_loss

BATCH_SIZE = 16
PROGRESS_EVERY = 25


class WorkerProtocolError(ValueError):
    """The start line cannot be understood."""


@dataclass(frozen=True)
class StartRequest:
    trial_id: str
    config: dict
    fidelity: int
    seed: int


def parse_start(line: str) -> StartRequest:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise WorkerProtocolError(f"start line is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise WorkerProtocolError("start line must be a JSON object")
    if doc.get("type") != "start":
        raise WorkerProtocolError(f"expected a start message, got {doc.get('type')!r}")
    for field in ("trial_id", "config", "fidelity", "seed"):
        if field not in doc:
            raise WorkerProtocolError(f"start message missing field {field!r}")
    if not isinstance(doc["config"], dict):
        raise WorkerProtocolError("config must be a JSON object")
    try:
        fidelity = int(doc["fidelity"])
        seed = int(doc["seed"])
    except (TypeError, ValueError) as exc:
        raise WorkerProtocolError(f"fidelity and seed must be integers: {exc}") from exc
    if fidelity <= 0:
        raise WorkerProtocolError(f"fidelity must be positive, got {fidelity}")
    return StartRequest(str(doc["trial_id"]), doc["config"], fidelity, seed)


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")
    sys.stdout.flush()


def _fail(trial_id: str, message: str) -> None:
    _emit({"type": "fail", "trial_id": trial_id, "message": message})


# -- metrics (independent of the search package on purpose) ------------------

def rank_probes(vectors: np.ndarray, identities: list[str]
                ) -> tuple[np.ndarray, np.ndarray]:
    """Closed-set identification ranks from raw embeddings.

    A probe's rank is the number of other-identity images strictly closer
    (squared L2) than its nearest same-identity mate; probes without a mate
    are excluded (rank forced to 0) but stay in the gallery.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    ident = np.asarray(identities)
    d2 = ((vectors[:, None, :] - vectors[None, :, :]) ** 2).sum(axis=2)
    same = ident[:, None] == ident[None, :]
    mates = same.copy()
    np.fill_diagonal(mates, False)
    nearest_mate = np.where(mates, d2, np.inf).min(axis=1)
    excluded = ~mates.any(axis=1)
    ranks = ((~same) & (d2 < nearest_mate[:, None])).sum(axis=1)
    ranks[excluded] = 0
    return ranks, excluded


def identification_metrics(vectors: np.ndarray, identities: list[str],
                           groups: list[str]) -> dict[str, float]:
    """The two wire objectives: overall error rate and group rank disparity."""
    ranks, excluded = rank_probes(vectors, identities)
    scored = ~excluded
    if not scored.any():
        raise ValueError("every probe is mateless; metrics undefined")

    errors = (ranks > 0) & scored
    group_arr = np.asarray(groups)
    mean_rank = {}
    for g in GROUPS:
        members = (group_arr == g) & scored
        if members.any():
            mean_rank[g] = float(ranks[members].mean())
    if len(mean_rank) < 2:
        raise ValueError("need scored probes in both groups")
    return {
        "error": float(errors[scored].mean()),
        "rank_disparity": abs(mean_rank[GROUPS[0]] - mean_rank[GROUPS[1]]),
    }


# -- training -----------------------------------------------------------------

def build_trainables(config: dict) -> tuple[EmbeddingNet, torch.nn.Parameter,
                                            HeadSpec, torch.optim.Optimizer]:
    for key in ("op1", "op2", "op3", "head", "optimizer"):
        if key not in config:
            raise ValueError(f"config missing key {key!r}")
    net = EmbeddingNet([config["op1"], config["op2"], config["op3"]])
    prototypes = torch.nn.Parameter(torch.randn(N_CLASSES, EMBED_DIM) * 0.05)
    spec = HeadSpec(kind=config["head"])
    params = list(net.parameters()) + [prototypes]
    opt_name = config["optimizer"]
    if opt_name == "SGD":
        optimizer = torch.optim.SGD(params, lr=float(config["lr_sgd"]),
                                    momentum=0.9)
    elif opt_name in ("Adam", "AdamW"):
        cls = torch.optim.Adam if opt_name == "Adam" else torch.optim.AdamW
        optimizer = cls(params, lr=float(config["lr_adam"]))
    else:
        raise ValueError(f"unknown optimizer {opt_name!r}")
    return net, prototypes, spec, optimizer


def embed_corpus(net: EmbeddingNet, faces: ToyFaces) -> np.ndarray:
    net.eval()
    with torch.no_grad():
        vectors = net(faces.images).double().numpy()
    net.train()
    return vectors


def train_epoch(net: EmbeddingNet, prototypes: torch.nn.Parameter,
                spec: HeadSpec, optimizer: torch.optim.Optimizer,
                faces: ToyFaces) -> float:
    """One pass over the corpus in a freshly shuffled order; returns mean loss."""
    order = torch.randperm(len(faces))
    total = 0.0
    for lo in range(0, len(faces), BATCH_SIZE):
        batch = order[lo:lo + BATCH_SIZE]
        optimizer.zero_grad()
        loss = margin_loss(spec, net(faces.images[batch]), prototypes,
                           faces.labels[batch])
        loss.backward()
        optimizer.step()
        total += float(loss.detach()) * len(batch)
    return total / len(faces)


def export_embeddings(path, faces: ToyFaces, vectors: np.ndarray) -> None:
    """Write embeddings as CSV with header image_id,identity,group,e0..e{d-1}."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "identity", "group"]
                        + [f"e{i}" for i in range(vectors.shape[1])])
        for row, image_id in enumerate(faces.image_ids):
            writer.writerow([image_id, faces.identities[row], faces.groups[row]]
                            + [repr(float(v)) for v in vectors[row]])


def run_trial(start: StartRequest, export_path: str | None) -> None:
    torch.manual_seed(start.seed)
    torch.set_num_threads(1)
    faces = make_toy_faces()
    net, prototypes, spec, optimizer = build_trainables(start.config)

    for epoch in range(1, start.fidelity + 1):
        train_epoch(net, prototypes, spec, optimizer, faces)
        if epoch % PROGRESS_EVERY == 0 and epoch < start.fidelity:
            metrics = identification_metrics(
                embed_corpus(net, faces), faces.identities, faces.groups)
            _emit({"type": "progress", "trial_id": start.trial_id,
                   "fidelity": epoch, "objectives": metrics})

    vectors = embed_corpus(net, faces)
    metrics = identification_metrics(vectors, faces.identities, faces.groups)
    if export_path is not None:
        export_embeddings(export_path, faces, vectors)
    _emit({"type": "final", "trial_id": start.trial_id,
           "fidelity": start.fidelity, "objectives": metrics})


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="toytrainer-worker",
        description="train one toy identification model per start message")
    parser.add_argument("--export-embeddings", metavar="PATH", default=None,
                        help="after training, write final embeddings as CSV")
    args = parser.parse_args(argv)

    line = sys.stdin.readline()
    doc = None
    try:
        doc = json.loads(line)
    except (json.JSONDecodeError, TypeError):
        pass
    trial_id = str(doc.get("trial_id", "unknown")) if isinstance(doc, dict) else "unknown"

    try:
        start = parse_start(line)
    except WorkerProtocolError as exc:
        _fail(trial_id, str(exc))
        return 1
    try:
        run_trial(start, args.export_embeddings)
    except Exception as exc:  # report all training crashes over the wire
        _fail(start.trial_id, f"{type(exc).__name__}: {exc}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
