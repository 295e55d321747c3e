"""Append-only JSON-Lines run log with crash-tolerant reload.

Each line is one serialized TrialRecord. A process dying mid-write can
leave at most one malformed trailing line, which reload skips with a
warning; malformed lines anywhere else mean real corruption and fail hard.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

from fairpareto.records import RecordError, TrialRecord

log = logging.getLogger(__name__)


class RunLogError(ValueError):
    pass


def record_line(record: TrialRecord) -> str:
    """Canonical one-line encoding: sorted keys, no whitespace."""
    return json.dumps(record.to_json_dict(), sort_keys=True,
                      separators=(",", ":"))


class RunLog:
    """Single-writer appender; every append is flushed before returning."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            self._fh = self.path.open("a", encoding="utf-8")
        except OSError as exc:
            raise RunLogError(f"cannot open {self.path} for append: {exc}") from exc

    def append(self, record: TrialRecord) -> None:
        self._fh.write(record_line(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "RunLog":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def load_records(path) -> list[TrialRecord]:
    """Parse a run log; skip one malformed trailing line, else fail hard."""
    path = Path(path)
    if not path.exists():
        raise RunLogError(f"run log {path} does not exist")
    records: list[TrialRecord] = []
    with path.open(encoding="utf-8") as fh:
        lines = fh.readlines()
    # a final "" after the terminating newline is not a log line
    while lines and lines[-1].strip() == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        try:
            doc = json.loads(line)
            records.append(TrialRecord.from_json_dict(doc))
        except (json.JSONDecodeError, RecordError, TypeError) as exc:
            if lineno == len(lines):
                log.warning("%s:%d: skipping malformed trailing line (%s)",
                            path, lineno, exc)
                break
            raise RunLogError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return records


def load_many(paths) -> list[TrialRecord]:
    """Concatenate several run logs in the order given."""
    out: list[TrialRecord] = []
    for p in paths:
        out.extend(load_records(p))
    return out
