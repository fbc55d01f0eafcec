"""Append-only JSONL event log of an arena run.

Line 0 is the header (``type = "header"``: format version, package version,
config echo). Every following line is one event with a running ``seq``
and a ``type`` among:

    chat, gossip_fetch, analysis, decision, trade, error, dividend, fee,
    evaluation, strategy, roll_day, metric, final

Keys are sorted and no wall-clock value is written, so equal runs give
byte-identical files.
"""
from __future__ import annotations

import json
import logging
import os
import threading
from typing import Any, Dict, IO, Iterator, List, Optional

from arena.errors import ReplayError

logger = logging.getLogger(__name__)

LOG_FORMAT_VERSION = 1

EVENT_TYPES = (
    "chat",
    "gossip_fetch",
    "analysis",
    "decision",
    "trade",
    "error",
    "dividend",
    "fee",
    "evaluation",
    "strategy",
    "roll_day",
    "metric",
    "final",
)


def _dumps(record: Dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


class EventLog:
    def __init__(self, header: Dict[str, Any], path: Optional[str] = None):
        self.header = {"type": "header", "format": LOG_FORMAT_VERSION, **header}
        self.records: List[Dict[str, Any]] = []
        self.path = path
        self._lock = threading.Lock()
        self._fh: Optional[IO[str]] = None
        if path:
            parent = os.path.dirname(path)
            if parent:
                os.makedirs(parent, exist_ok=True)
            self._fh = open(path, "w", encoding="utf-8", newline="\n")
            self._fh.write(_dumps(self.header) + "\n")

    # --- écriture -----------------------------------------------------------

    def append(self, type: str, **fields: Any) -> Dict[str, Any]:
        if type not in EVENT_TYPES:
            raise ValueError(f"unknown event type: {type!r}")
        with self._lock:
            record = {"seq": len(self.records), "type": type, **fields}
            self.records.append(record)
            if self._fh is not None:
                self._fh.write(_dumps(record) + "\n")
        return record

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # --- lecture ------------------------------------------------------------

    def of_type(self, type: str) -> List[Dict[str, Any]]:
        return [r for r in self.records if r["type"] == type]

    def __iter__(self) -> Iterator[Dict[str, Any]]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def config(self) -> Dict[str, Any]:
        return self.header.get("config", {})

    @property
    def final_state(self) -> Optional[Dict[str, Any]]:
        finals = self.of_type("final")
        return finals[-1]["state"] if finals else None

    def dumps(self) -> str:
        return "".join(_dumps(r) + "\n" for r in [self.header, *self.records])

    @classmethod
    def load(cls, path: str) -> "EventLog":
        """Parse a log file; a cut-off last line is dropped with a warning."""
        try:
            with open(path, encoding="utf-8") as f:
                lines = f.read().split("\n")
        except FileNotFoundError as exc:
            raise ReplayError(f"log not found: {path}") from exc
        complete = lines[:-1]
        tail = lines[-1]
        if tail.strip():
            logger.warning("ignoring truncated last line path=%s", path)
        if not complete or not complete[0].strip():
            raise ReplayError("empty log", index=0)

        try:
            header = json.loads(complete[0])
        except json.JSONDecodeError as exc:
            raise ReplayError(f"unreadable header: {exc}", index=0) from exc
        if header.get("type") != "header":
            raise ReplayError("first record is not a header", index=0)

        log = cls.__new__(cls)
        log.header = header
        log.records = []
        log.path = path
        log._lock = threading.Lock()
        log._fh = None
        for i, line in enumerate(complete[1:]):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayError(f"unreadable record: {exc}", index=i) from exc
            if not isinstance(record, dict) or record.get("type") not in EVENT_TYPES:
                raise ReplayError("record without a known type", index=i)
            log.records.append(record)
        return log
