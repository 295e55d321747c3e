"""Asynchronous successive halving over a geometric fidelity ladder.

Trials run at ascending fidelity rungs; completed trials whose cost lands
in the top 1/eta of their rung are promoted to the next rung (re-run at
the higher fidelity), everything else stays put. No synchronization
barriers: promotions are decided from whatever results exist right now.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Mapping

Configuration = dict


class SchedulerError(ValueError):
    pass


def ladder(min_fidelity: int, max_fidelity: int, eta: int = 2) -> list[int]:
    """Geometric rung ladder min_f * eta^k, final rung clamped to max_f."""
    if min_fidelity <= 0 or max_fidelity < min_fidelity:
        raise SchedulerError(
            f"need 0 < min_fidelity <= max_fidelity, got {min_fidelity}, {max_fidelity}"
        )
    if eta < 2:
        raise SchedulerError(f"eta must be >= 2, got {eta}")
    rungs = []
    f = min_fidelity
    while f < max_fidelity:
        rungs.append(f)
        f *= eta
    rungs.append(max_fidelity)
    return rungs


@dataclass(frozen=True)
class Job:
    """One unit of work: run `config` at `fidelity` under the given trial id."""
    trial_id: int
    config: Configuration
    fidelity: int
    rung_index: int
    source_trial_id: int | None = None    # set when this job is a promotion

    @property
    def is_promotion(self) -> bool:
        return self.source_trial_id is not None


@dataclass
class _Rung:
    fidelity: int
    # (cost, arrival, trial_id) kept sorted: best cost first, earlier
    # completion wins ties
    completed: list[tuple[float, int, int]] = field(default_factory=list)
    promoted: set[int] = field(default_factory=set)


class AshaScheduler:
    """Single-ladder promotion-type ASHA.

    `report` and `next_job` must be called from one logical owner; results
    may come from many workers but enter through that serialization point.
    """

    def __init__(self, min_fidelity: int, max_fidelity: int, eta: int = 2):
        self.eta = int(eta)
        self.rungs = [_Rung(f) for f in ladder(min_fidelity, max_fidelity, eta)]
        self._pending: dict[int, int] = {}          # trial_id -> rung index
        self._configs: dict[int, Configuration] = {}
        self._done: set[int] = set()
        self._next_id = 0
        self._arrivals = 0

    @property
    def fidelities(self) -> list[int]:
        return [r.fidelity for r in self.rungs]

    @property
    def max_fidelity(self) -> int:
        return self.rungs[-1].fidelity

    def rung_index(self, fidelity: int) -> int:
        for i, rung in enumerate(self.rungs):
            if rung.fidelity == fidelity:
                return i
        raise SchedulerError(f"{fidelity} is not a rung of {self.fidelities}")

    def config_of(self, trial_id: int) -> Configuration:
        return self._configs[trial_id]

    def pending_count(self) -> int:
        return len(self._pending)

    def completed_count(self) -> int:
        return len(self._done)

    def _issue(self, config: Configuration, rung_index: int,
               source: int | None) -> Job:
        trial_id = self._next_id
        self._next_id += 1
        self._pending[trial_id] = rung_index
        self._configs[trial_id] = config
        return Job(trial_id=trial_id, config=config,
                   fidelity=self.rungs[rung_index].fidelity,
                   rung_index=rung_index, source_trial_id=source)

    def next_job(self, suggest_fn: Callable[[], Configuration]) -> Job:
        """Promote where the rule allows, else start a fresh base-rung trial.

        Rungs are scanned from the highest non-top rung downward; at rung r a
        promotion fires only while |promoted(r)| < floor(|completed(r)|/eta),
        and it takes the best-cost unpromoted trial inside that top slice.
        """
        for r in range(len(self.rungs) - 2, -1, -1):
            rung = self.rungs[r]
            quota = len(rung.completed) // self.eta
            if len(rung.promoted) >= quota:
                continue
            for cost, _, trial_id in rung.completed[:quota]:
                if trial_id not in rung.promoted:
                    rung.promoted.add(trial_id)
                    return self._issue(self._configs[trial_id], r + 1,
                                       source=trial_id)
        return self._issue(suggest_fn(), 0, source=None)

    def report(self, trial_id: int, fidelity: int, cost: float) -> None:
        """Record a finished trial's scalarized cost at its rung."""
        if trial_id in self._done:
            raise SchedulerError(f"trial {trial_id} already reported")
        if trial_id not in self._pending:
            raise SchedulerError(f"trial {trial_id} was never issued")
        r = self._pending[trial_id]
        if self.rungs[r].fidelity != fidelity:
            raise SchedulerError(
                f"trial {trial_id} is pending at fidelity "
                f"{self.rungs[r].fidelity}, not {fidelity}"
            )
        del self._pending[trial_id]
        self._done.add(trial_id)
        self._arrivals += 1
        bisect.insort(self.rungs[r].completed,
                      (float(cost), self._arrivals, trial_id))

    def snapshot(self) -> list[Mapping[str, object]]:
        """Per-rung counts, handy for logging and invariant checks."""
        return [
            {"fidelity": rung.fidelity,
             "completed": len(rung.completed),
             "promoted": len(rung.promoted)}
            for rung in self.rungs
        ]
