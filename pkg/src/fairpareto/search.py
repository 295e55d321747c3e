"""The search loop: suggestion, successive halving, evaluation, logging.

A single control thread owns the scheduler, surrogate history, and run
log; evaluations run on a worker pool and their completions are drained
back into that thread, so all bookkeeping stays serialized.
"""
from __future__ import annotations

import concurrent.futures as cf
import logging
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fairpareto import pareto, surrogate
from fairpareto.asha import AshaScheduler, Job
from fairpareto.backends import BackendFailure, ProtocolError
from fairpareto.records import (STATUS_FAILED, STATUS_REPORTED, TrialRecord,
                                highest_fidelity_per_config)
from fairpareto.runlog import RunLog
from fairpareto.scalarize import (RHO, NormalizationState, ScalarizeError,
                                  sample_weights, scalarize_objectives)
from fairpareto.space import SearchSpace

log = logging.getLogger(__name__)


class SearchError(ValueError):
    pass


@dataclass
class SearchBudget:
    """Stop criteria; at least one must be set.

    `max_fidelity_equivalents` counts sum(fidelity / max_fidelity) over
    dispatched trials, so one top-rung trial costs 1.0.
    """
    max_trials: int | None = None
    max_fidelity_equivalents: float | None = None
    wall_clock_limit_s: float | None = None

    def __post_init__(self):
        limits = (self.max_trials, self.max_fidelity_equivalents,
                  self.wall_clock_limit_s)
        if all(v is None for v in limits):
            raise SearchError("budget needs at least one limit")
        for v in limits:
            if v is not None and v <= 0:
                raise SearchError(f"budget limits must be positive, got {v}")


@dataclass
class SearchResult:
    history: list[TrialRecord]
    front: list[TrialRecord]
    front_points: list[tuple[float, ...]]
    objective_names: tuple[str, ...]

    @property
    def n_reported(self) -> int:
        return sum(1 for r in self.history if r.status == STATUS_REPORTED)


def _defined(objectives) -> bool:
    return objectives is not None and all(v is not None
                                          for v in objectives.values())


def extract_front(history: Sequence[TrialRecord]
                  ) -> tuple[list[TrialRecord], list[tuple], tuple[str, ...]]:
    """Non-dominated reported records at the highest fidelity present.

    Records carrying an undefined objective value cannot be ranked and are
    dropped before dominance filtering.
    """
    reported = [r for r in history
                if r.status == STATUS_REPORTED and _defined(r.objectives)]
    if not reported:
        return [], [], ()
    top = max(r.fidelity for r in reported)
    pool = [r for r in reported if r.fidelity == top]
    names = tuple(sorted(pool[0].objectives))
    points = [tuple(float(r.objectives[k]) for k in names) for r in pool]
    front_points, front_records = pareto.pareto_front(points, pool)
    return front_records, front_points, names


class _Loop:
    """Mutable search state; `run` is the only public entry."""

    def __init__(self, space: SearchSpace, backend, budget: SearchBudget,
                 min_fidelity: int, max_fidelity: int, eta: int,
                 rho: float, n_workers: int, seed: int, log_path):
        self.space = space
        self.backend = backend
        self.budget = budget
        self.scheduler = AshaScheduler(min_fidelity, max_fidelity, eta)
        self.rho = rho
        self.n_workers = max(1, int(n_workers))
        self.seed = int(seed)
        self.rng = np.random.default_rng(seed)
        self.log_path = log_path
        self.history: list[TrialRecord] = []
        self.trial_seeds: dict[int, int] = {}
        self.current_weights: np.ndarray | None = None
        self.worst_cost: float | None = None
        self.issued = 0
        self.consumed_equivalents = 0.0
        self.deadline = (None if budget.wall_clock_limit_s is None
                         else time.monotonic() + budget.wall_clock_limit_s)

    # -- budget -----------------------------------------------------------

    def can_issue(self) -> bool:
        b = self.budget
        if b.max_trials is not None and self.issued >= b.max_trials:
            return False
        if (b.max_fidelity_equivalents is not None
                and self.consumed_equivalents >= b.max_fidelity_equivalents):
            return False
        if self.deadline is not None and time.monotonic() >= self.deadline:
            return False
        return True

    def _remaining_time(self) -> float | None:
        if self.deadline is None:
            return None
        return max(0.001, self.deadline - time.monotonic())

    # -- suggestion and scalarization --------------------------------------

    def _suggest(self):
        names = self._objective_names()
        if names is not None:
            self.current_weights = self._fresh_weights(len(names))
        return surrogate.suggest(self.history, self.space, self.rng,
                                 rho=self.rho)

    def _fresh_weights(self, k: int) -> np.ndarray:
        if k < 2:
            return np.asarray([1.0])
        return sample_weights(self.rng, k)

    def _objective_names(self) -> tuple[str, ...] | None:
        for record in self.history:
            if record.status == STATUS_REPORTED and _defined(record.objectives):
                return tuple(sorted(record.objectives))
        return None

    def _scalarize(self, objectives) -> float | None:
        """Cost for the scheduler, or None when the record can't be scored."""
        if not _defined(objectives):
            return None
        usable = [r.objectives for r in
                  highest_fidelity_per_config(self.history)
                  if _defined(r.objectives)]
        if not usable:
            return None
        try:
            state = NormalizationState.from_objectives(usable)
            if self.current_weights is None \
                    or len(self.current_weights) != len(state.names):
                self.current_weights = self._fresh_weights(len(state.names))
            return scalarize_objectives(objectives, state,
                                        self.current_weights, rho=self.rho)
        except ScalarizeError as exc:
            log.warning("cannot scalarize %s: %s", objectives, exc)
            return None

    def _imputed_cost(self) -> float:
        # worst possible parego value is 1 + rho (normalized objectives)
        return self.worst_cost if self.worst_cost is not None else 1.0 + self.rho

    # -- trial lifecycle ----------------------------------------------------

    def _dispatch(self, executor: cf.ThreadPoolExecutor, job: Job):
        if job.source_trial_id is not None:
            trial_seed = self.trial_seeds[job.source_trial_id]
        else:
            trial_seed = self.seed + job.trial_id
        self.trial_seeds[job.trial_id] = trial_seed
        self.issued += 1
        self.consumed_equivalents += job.fidelity / self.scheduler.max_fidelity
        return executor.submit(self.backend.evaluate, job.config, job.fidelity,
                               trial_seed, timeout=self._remaining_time(),
                               trial_id=job.trial_id)

    def _complete(self, job: Job, future: cf.Future, runlog: RunLog | None):
        trial_seed = self.trial_seeds[job.trial_id]
        try:
            result = future.result()
            record = TrialRecord(
                trial_id=job.trial_id, config=job.config, seed=trial_seed,
                fidelity=job.fidelity, status=STATUS_REPORTED,
                objectives=result.objectives, wall_time_s=result.wall_time_s)
        except (BackendFailure, ProtocolError) as exc:
            log.warning("trial %d failed: %s", job.trial_id, exc)
            record = TrialRecord(
                trial_id=job.trial_id, config=job.config, seed=trial_seed,
                fidelity=job.fidelity, status=STATUS_FAILED,
                objectives=None, wall_time_s=0.0)
        self.history.append(record)
        if runlog is not None:
            runlog.append(record)

        cost = None
        if record.status == STATUS_REPORTED:
            cost = self._scalarize(record.objectives)
        if cost is None:
            cost = self._imputed_cost()
        else:
            self.worst_cost = cost if self.worst_cost is None \
                else max(self.worst_cost, cost)
        self.scheduler.report(job.trial_id, job.fidelity, cost)

    # -- main loop ----------------------------------------------------------

    def run(self) -> SearchResult:
        runlog = RunLog(self.log_path) if self.log_path is not None else None
        in_flight: dict[cf.Future, Job] = {}
        try:
            with cf.ThreadPoolExecutor(max_workers=self.n_workers) as executor:
                while True:
                    while self.can_issue() and len(in_flight) < self.n_workers:
                        job = self.scheduler.next_job(self._suggest)
                        in_flight[self._dispatch(executor, job)] = job
                    if not in_flight:
                        break
                    done, _ = cf.wait(in_flight,
                                      return_when=cf.FIRST_COMPLETED)
                    for future in sorted(done,
                                         key=lambda f: in_flight[f].trial_id):
                        self._complete(in_flight.pop(future), future, runlog)
        finally:
            if runlog is not None:
                runlog.close()
        front, points, names = extract_front(self.history)
        log.info("search done: %d trials, %d reported, front size %d",
                 len(self.history), sum(1 for r in self.history
                                        if r.status == STATUS_REPORTED),
                 len(front))
        return SearchResult(history=self.history, front=front,
                            front_points=points, objective_names=names)


def run_search(space: SearchSpace, backend, budget: SearchBudget,
               min_fidelity: int = 25, max_fidelity: int = 100, eta: int = 2,
               rho: float = RHO, n_workers: int = 1, seed: int = 0,
               log_path=None) -> SearchResult:
    """Run one full search; deterministic for a fixed seed with one worker
    and a deterministic backend."""
    loop = _Loop(space, backend, budget, min_fidelity, max_fidelity, eta,
                 rho, n_workers, seed, log_path)
    return loop.run()
