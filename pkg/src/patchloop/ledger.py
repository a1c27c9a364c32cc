"""Append-only JSONL ledger for candidate records.

Every processed candidate is flushed to disk before the next one is
consumed, so a killed run loses at most the record being written.  Keys
are sorted and no timestamps are stored: two runs with equal seeds must
produce byte-identical ledgers.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .records import CandidateRecord


def dumps_record(record: CandidateRecord) -> str:
    return json.dumps(record.to_json_dict(), sort_keys=True)


class LedgerWriter:
    def __init__(self, path: str | Path, append: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        mode = "a" if append else "w"
        self._fh = open(self.path, mode, encoding="utf-8")

    def write(self, record: CandidateRecord) -> None:
        self._fh.write(dumps_record(record) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self) -> "LedgerWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_ledger(path: str | Path) -> list[CandidateRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            records.append(CandidateRecord.from_json_dict(json.loads(line)))
    return records


def complete_cycles(records: list[CandidateRecord], per_cycle: int) -> int:
    """Number of leading cycles with a full complement of records.

    Used on resume: a partial cycle is discarded and re-run, so only the
    prefix of whole cycles counts.
    """
    by_cycle: dict[int, int] = {}
    for record in records:
        by_cycle[record.cycle] = by_cycle.get(record.cycle, 0) + 1
    done = 0
    while by_cycle.get(done, 0) == per_cycle:
        done += 1
    return done


def truncate_to_cycles(path: str | Path, cycles: int) -> list[CandidateRecord]:
    """Rewrite the ledger keeping only records from the first ``cycles``
    cycles, returning what was kept."""
    kept = [r for r in read_ledger(path) if r.cycle < cycles]
    with open(path, "w", encoding="utf-8") as fh:
        for record in kept:
            fh.write(dumps_record(record) + "\n")
    return kept
