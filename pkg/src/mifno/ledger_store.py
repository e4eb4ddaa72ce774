"""Append-only JSON-lines ledger of solved increments.

Each line is one record. ``kind = "header"`` pins the integral file the
ledger belongs to; ``kind = "ec"`` carries one increment's correlation
energy for one (solver, FNO policy) pair; ``kind = "eps"`` carries the
increment energy once its order has been reduced. A torn final line (a run
killed mid-write) is ignored on load.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

from mifno.errors import ConfigError, ConsistencyError
from mifno.increments import EC_CONFLICT_TOL, Increment


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def record_key(subset, solver: str, policy: str) -> tuple:
    return tuple(int(i) for i in subset), solver, policy


class LedgerFile:
    """Single serialised sink for ledger records; ``path=None`` keeps them in memory."""

    def __init__(self, path, digest: str):
        self.path = Path(path) if path is not None else None
        self.digest = digest
        self._lock = threading.Lock()
        self.records: dict = {}

    @classmethod
    def open(cls, path, digest: str, resume: bool) -> "LedgerFile":
        led = cls(path, digest)
        if led.path is None:
            return led
        if resume and led.path.exists():
            led._load()
        else:
            led.path.parent.mkdir(parents=True, exist_ok=True)
            led.path.write_text("")
        if not led.path.stat().st_size:
            led._append({"kind": "header", "fcidump_sha256": digest})
        return led

    def _load(self) -> None:
        lines = self.path.read_text().split("\n")
        good = []
        for k, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                if k >= len(lines) - 2:
                    break  # torn tail from an interrupted write
                raise ConsistencyError(f"corrupt ledger line {k + 1} in {self.path}") from None
            good.append(line)
            if rec.get("kind") == "header":
                if rec.get("fcidump_sha256") != self.digest:
                    raise ConfigError(f"ledger {self.path} belongs to a different FCIDUMP")
            elif rec.get("kind") == "ec":
                self._remember(rec)
        # drop the torn tail so later appends start on a clean line
        self.path.write_text("".join(g + "\n" for g in good))

    def _remember(self, rec: dict) -> None:
        key = record_key(rec["subset"], rec["solver"], rec["fno_policy"])
        old = self.records.get(key)
        if old is not None and abs(old["e_c"] - rec["e_c"]) > EC_CONFLICT_TOL:
            raise ConsistencyError(f"conflicting E_c for {key}: {old['e_c']!r} vs {rec['e_c']!r}")
        self.records[key] = rec

    def _append(self, rec: dict) -> None:
        if self.path is None:
            return
        line = json.dumps(rec, sort_keys=True) + "\n"
        with open(self.path, "a") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def write_ec(self, rec: dict) -> None:
        rec = dict(rec, kind="ec")
        with self._lock:
            self._remember(rec)
            self._append(rec)

    def write_eps(self, subset, solver: str, policy: str, eps: float) -> None:
        with self._lock:
            self._append({"kind": "eps", "subset": list(subset), "order": len(subset),
                          "solver": solver, "fno_policy": policy, "eps": eps})

    def get(self, subset, solver: str, policy: str):
        return self.records.get(record_key(Increment(subset), solver, policy))
