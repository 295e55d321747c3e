"""Objective backends: builtin synthetic functions, external worker
processes speaking a JSON-lines protocol, and frozen embedding files.

Worker wire protocol (UTF-8, one JSON object per newline-terminated line):
  orchestrator -> worker: {"type":"start","trial_id":"t17","config":{...},
                           "fidelity":50,"seed":3}
  worker -> orchestrator: {"type":"progress","trial_id":"t17","fidelity":25,
                           "objectives":{"error":0.41,"rank_disparity":2.1}}
                          {"type":"final","trial_id":"t17","fidelity":50,
                           "objectives":{"error":0.32,"rank_disparity":1.7}}
                          {"type":"fail","trial_id":"t17","message":"..."}
Unknown fields are ignored; missing required fields are protocol errors.
Progress fidelities must strictly increase and the final fidelity must
equal the requested target.
"""
from __future__ import annotations

import json
import logging
import math
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from fairpareto.space import Configuration, SearchSpace, config_key

log = logging.getLogger(__name__)

MESSAGE_TYPES = ("start", "progress", "final", "fail")


class BackendError(ValueError):
    """Bad backend specification (a configuration error)."""


class BackendFailure(RuntimeError):
    """A single evaluation failed; the search may continue."""


class ProtocolError(BackendFailure):
    """The worker sent something the protocol does not allow."""


def zdt1_mf(x: Sequence[float], fidelity_fraction: float) -> dict[str, float]:
    """Bi-objective ZDT1 with an additive low-fidelity bias.

    b = 0.5*(1 - s) vanishes at full fidelity (s=1), where the Pareto
    front is the exact ZDT1 curve f2 = 1 - sqrt(f1) at x2..xn = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise BackendError(f"zdt1_mf needs a vector of length >= 2, got {x.shape}")
    if ((x < 0.0) | (x > 1.0)).any():
        raise BackendError("zdt1_mf inputs must lie in [0, 1]")
    s = float(fidelity_fraction)
    if not 0.0 < s <= 1.0:
        raise BackendError(f"fidelity fraction must be in (0, 1], got {s}")
    bias = 0.5 * (1.0 - s)
    g = 1.0 + 9.0 * float(x[1:].mean())
    f1 = float(x[0]) + bias
    f2 = g * (1.0 - math.sqrt(float(x[0]) / g)) + bias
    return {"f1": f1, "f2": f2}


@dataclass(frozen=True)
class WorkerMessage:
    type: str
    trial_id: str
    config: tuple | None = None        # frozen as sorted (key, value) pairs
    fidelity: int | None = None
    seed: int | None = None
    objectives: tuple | None = None    # frozen as sorted (key, value) pairs
    message: str | None = None
    resumable: bool = False

    @staticmethod
    def start(trial_id: str, config: Mapping, fidelity: int,
              seed: int) -> "WorkerMessage":
        return WorkerMessage(type="start", trial_id=trial_id,
                             config=tuple(sorted(config.items())),
                             fidelity=int(fidelity), seed=int(seed))

    def config_dict(self) -> dict:
        return dict(self.config or ())

    def objectives_dict(self) -> dict:
        return dict(self.objectives or ())

    def to_line(self) -> str:
        doc: dict = {"type": self.type, "trial_id": self.trial_id}
        if self.type == "start":
            doc["config"] = self.config_dict()
            doc["fidelity"] = self.fidelity
            doc["seed"] = self.seed
        elif self.type in ("progress", "final"):
            doc["fidelity"] = self.fidelity
            doc["objectives"] = self.objectives_dict()
            if self.type == "final" and self.resumable:
                doc["resumable"] = True
        elif self.type == "fail":
            doc["message"] = self.message or ""
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_line(line: str) -> "WorkerMessage":
        text = line.strip()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"not valid JSON: {text!r} ({exc})") from exc
        if not isinstance(doc, dict):
            raise ProtocolError(f"expected a JSON object, got: {text!r}")

        def need(field: str):
            if field not in doc:
                raise ProtocolError(f"missing field {field!r} in: {text!r}")
            return doc[field]

        mtype = need("type")
        if mtype not in MESSAGE_TYPES:
            raise ProtocolError(f"unknown message type {mtype!r} in: {text!r}")
        trial_id = str(need("trial_id"))
        if mtype == "start":
            return WorkerMessage(
                type=mtype, trial_id=trial_id,
                config=tuple(sorted(dict(need("config")).items())),
                fidelity=int(need("fidelity")), seed=int(need("seed")))
        if mtype in ("progress", "final"):
            objectives = need("objectives")
            if not isinstance(objectives, dict):
                raise ProtocolError(f"objectives must be an object in: {text!r}")
            return WorkerMessage(
                type=mtype, trial_id=trial_id,
                fidelity=int(need("fidelity")),
                objectives=tuple(sorted(objectives.items())),
                resumable=bool(doc.get("resumable", False)))
        return WorkerMessage(type=mtype, trial_id=trial_id,
                             message=str(need("message")))


@dataclass
class EvalResult:
    objectives: dict[str, float | None]
    wall_time_s: float


ProgressFn = Callable[[int, dict], None]


class BuiltinBackend:
    """Deterministic synthetic objective over the encoded configuration.

    Evaluations are pure functions of (config, fidelity), so repeat runs
    are bit-identical; wall time is reported as 0 to keep logs stable.
    """

    KNOWN = ("zdt1", "zdt1_mf")

    def __init__(self, name: str, space: SearchSpace, max_fidelity: int):
        if name not in self.KNOWN:
            raise BackendError(
                f"unknown builtin objective {name!r} (have {self.KNOWN})")
        self.space = space
        self.max_fidelity = int(max_fidelity)

    def evaluate(self, config: Configuration, fidelity: int, seed: int,
                 timeout: float | None = None,
                 on_progress: ProgressFn | None = None,
                 trial_id: int | str | None = None) -> EvalResult:
        del seed, timeout, on_progress, trial_id   # deterministic, instant
        x = self.space.encode(config)
        objectives = zdt1_mf(x, fidelity / self.max_fidelity)
        return EvalResult(objectives=objectives, wall_time_s=0.0)


class WorkerBackend:
    """Runs one external worker process per evaluation."""

    def __init__(self, command: str):
        if not command.strip():
            raise BackendError("worker command is empty")
        self.command = command
        self.argv = shlex.split(command)

    def evaluate(self, config: Configuration, fidelity: int, seed: int,
                 timeout: float | None = None,
                 on_progress: ProgressFn | None = None,
                 trial_id: int | str | None = None) -> EvalResult:
        if trial_id is None:
            wire_id = f"t{config_key(config)[:6]}-{fidelity}-{seed}"
        else:
            wire_id = f"t{trial_id}"
        start = WorkerMessage.start(wire_id, config, fidelity, seed)
        t0 = time.monotonic()
        try:
            proc = subprocess.Popen(
                self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8")
        except OSError as exc:
            raise BackendFailure(f"cannot launch worker {self.argv[0]!r}: {exc}")

        timed_out = threading.Event()
        timer: threading.Timer | None = None
        if timeout is not None:
            def _expire():
                timed_out.set()
                proc.kill()
            timer = threading.Timer(timeout, _expire)
            timer.daemon = True
            timer.start()

        try:
            proc.stdin.write(start.to_line() + "\n")
            proc.stdin.flush()
            last_progress_fidelity = 0
            while True:
                line = proc.stdout.readline()
                if line == "":
                    if timed_out.is_set():
                        raise BackendFailure(
                            f"worker timed out after {timeout}s")
                    code = proc.wait()
                    raise BackendFailure(
                        f"worker exited (code {code}) without a final message")
                if not line.strip():
                    continue
                msg = WorkerMessage.from_line(line)
                if msg.trial_id != wire_id:
                    raise ProtocolError(
                        f"trial_id mismatch: sent {wire_id!r}, "
                        f"got {msg.trial_id!r}")
                if msg.type == "fail":
                    raise BackendFailure(f"worker failed: {msg.message}")
                if msg.type == "progress":
                    if msg.fidelity <= last_progress_fidelity:
                        raise ProtocolError(
                            f"progress fidelity {msg.fidelity} not above "
                            f"{last_progress_fidelity}")
                    if msg.fidelity > fidelity:
                        raise ProtocolError(
                            f"progress fidelity {msg.fidelity} exceeds "
                            f"target {fidelity}")
                    last_progress_fidelity = msg.fidelity
                    if on_progress is not None:
                        on_progress(msg.fidelity, msg.objectives_dict())
                    continue
                if msg.type == "final":
                    if msg.fidelity != fidelity:
                        raise ProtocolError(
                            f"final fidelity {msg.fidelity} != target {fidelity}")
                    return EvalResult(objectives=msg.objectives_dict(),
                                      wall_time_s=time.monotonic() - t0)
                raise ProtocolError(f"unexpected {msg.type!r} message from worker")
        except BrokenPipeError as exc:
            raise BackendFailure(f"worker closed its input early: {exc}")
        finally:
            if timer is not None:
                timer.cancel()
            if proc.stdin and not proc.stdin.closed:
                try:
                    proc.stdin.close()
                except (BrokenPipeError, OSError):
                    pass
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
            if proc.stdout:
                proc.stdout.close()


class EmbeddingBackend:
    """Evaluates frozen embedding files written by an external trainer.

    The template is formatted with {config_key}, {fidelity} and {seed} to
    address one embedding file per evaluation. Objectives are the overall
    identification error and the rank disparity between the file's two
    groups (worst pair when more than two).
    """

    def __init__(self, template: str):
        if not template.strip():
            raise BackendError("embeddings path template is empty")
        self.template = template

    def path_for(self, config: Configuration, fidelity: int, seed: int) -> str:
        try:
            return self.template.format(config_key=config_key(config),
                                        fidelity=fidelity, seed=seed)
        except (KeyError, IndexError) as exc:
            raise BackendError(
                f"bad embeddings template {self.template!r}: {exc}")

    def evaluate(self, config: Configuration, fidelity: int, seed: int,
                 timeout: float | None = None,
                 on_progress: ProgressFn | None = None,
                 trial_id: int | str | None = None) -> EvalResult:
        from fairpareto import metrics

        del timeout, on_progress, trial_id
        path = self.path_for(config, fidelity, seed)
        t0 = time.monotonic()
        try:
            embedding_set = metrics.EmbeddingSet.load(path)
        except (OSError, metrics.MetricError) as exc:
            raise BackendFailure(f"cannot evaluate embeddings {path}: {exc}")
        report = metrics.compute_ranks(embedding_set)
        groups = sorted(report.per_group)
        if len(groups) < 2:
            raise BackendFailure(
                f"{path}: need two scored groups, have {groups}")
        if len(groups) == 2:
            value = metrics.fairness_metric(
                report, "rank_disparity", groups[0], groups[1]).value
        else:
            value = metrics.multi_group_metric(
                report, "rank_disparity", groups).value
        objectives = {"error": report.overall_error_rate(),
                      "rank_disparity": value}
        return EvalResult(objectives=objectives,
                          wall_time_s=time.monotonic() - t0)


Backend = BuiltinBackend | WorkerBackend | EmbeddingBackend


def parse_backend(spec: str, space: SearchSpace, max_fidelity: int) -> Backend:
    """Parse 'builtin:NAME' | 'worker:CMD' | 'embeddings:TEMPLATE'."""
    kind, sep, rest = spec.partition(":")
    if not sep:
        raise BackendError(
            f"backend {spec!r} must look like builtin:NAME, worker:CMD, "
            f"or embeddings:TEMPLATE")
    if kind == "builtin":
        return BuiltinBackend(rest, space, max_fidelity)
    if kind == "worker":
        return WorkerBackend(rest)
    if kind == "embeddings":
        return EmbeddingBackend(rest)
    raise BackendError(f"unknown backend kind {kind!r}")
