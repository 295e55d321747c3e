"""Trial records: the unit entry of a search run log."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

SCHEMA_VERSION = 1

STATUS_RUNNING = "running"
STATUS_REPORTED = "reported"
STATUS_FAILED = "failed"
STATUSES = (STATUS_RUNNING, STATUS_REPORTED, STATUS_FAILED)


class RecordError(ValueError):
    pass


@dataclass
class TrialRecord:
    """One trial evaluation: a config run at one fidelity under one seed.

    `objectives` maps objective name to value; an individual value may be
    None when a ratio metric was undefined for that evaluation. The dict
    itself is present exactly when status is "reported".
    """
    trial_id: int
    config: dict
    seed: int
    fidelity: int
    status: str
    objectives: Mapping[str, float | None] | None = None
    wall_time_s: float = 0.0

    def __post_init__(self):
        if self.status not in STATUSES:
            raise RecordError(f"unknown status {self.status!r}")
        if (self.objectives is not None) != (self.status == STATUS_REPORTED):
            raise RecordError(
                f"status {self.status!r} with objectives "
                f"{'present' if self.objectives is not None else 'missing'}"
            )
        if self.fidelity <= 0:
            raise RecordError(f"fidelity must be positive, got {self.fidelity}")
        if self.wall_time_s < 0:
            raise RecordError(f"negative wall_time_s {self.wall_time_s}")

    def to_json_dict(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "trial_id": self.trial_id,
            "config": dict(self.config),
            "seed": self.seed,
            "fidelity": self.fidelity,
            "status": self.status,
            "objectives": None if self.objectives is None
            else dict(self.objectives),
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "TrialRecord":
        if doc.get("v") != SCHEMA_VERSION:
            raise RecordError(f"unsupported record version {doc.get('v')!r}")
        try:
            return cls(
                trial_id=int(doc["trial_id"]),
                config=dict(doc["config"]),
                seed=int(doc["seed"]),
                fidelity=int(doc["fidelity"]),
                status=str(doc["status"]),
                objectives=None if doc["objectives"] is None
                else dict(doc["objectives"]),
                wall_time_s=float(doc["wall_time_s"]),
            )
        except KeyError as exc:
            raise RecordError(f"record missing field {exc}") from exc


def highest_fidelity_per_config(records) -> list[TrialRecord]:
    """Keep, per configuration, the reported record at its highest fidelity.

    Later records win ties so re-evaluations supersede earlier ones.
    Order of first appearance is preserved.
    """
    from fairpareto.space import config_key

    best: dict[str, TrialRecord] = {}
    for record in records:
        if record.status != STATUS_REPORTED:
            continue
        key = config_key(record.config)
        held = best.get(key)
        if held is None or record.fidelity >= held.fidelity:
            best[key] = record
    return list(best.values())
