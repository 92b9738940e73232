"""JSON-lines trace recording shared by the beamforming driver and engine.

Records are buffered, then emitted sorted by (time, insertion order) with a
fresh sequence number, so the written trace has strictly increasing
(t, seq) keys even when a burst is simulated ahead of its wall-clock span.
"""

from __future__ import annotations

import json
from typing import Any, Optional


class TraceRecorder:
    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._records: list[tuple[float, int, dict[str, Any]]] = []
        self._counter = 0

    def record(self, t_us: float, kind: str, **fields: Any) -> None:
        if not self.enabled:
            return
        rec = {"t": round(float(t_us), 3), "kind": kind}
        for key, value in fields.items():
            if value is not None:
                rec[key] = value
        self._records.append((rec["t"], self._counter, rec))
        self._counter += 1

    def sorted_records(self) -> list[dict[str, Any]]:
        out = []
        for seq, (_, _, rec) in enumerate(sorted(self._records, key=lambda r: (r[0], r[1]))):
            merged = dict(rec)
            merged["seq"] = seq
            out.append(merged)
        return out

    def iter_kind(self, kind: str) -> list[dict[str, Any]]:
        return [r for r in self.sorted_records() if r["kind"] == kind]

    def to_jsonl(self) -> str:
        lines = [json.dumps(rec, sort_keys=True) for rec in self.sorted_records()]
        return "\n".join(lines) + ("\n" if lines else "")

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


def null_recorder() -> TraceRecorder:
    return TraceRecorder(enabled=False)
