"""Simulation trace: event log, block metadata, per-node tip and commit history.

JSONL export (schema ``crystalsim.trace/1``), one JSON object per line:

* ``{"record": "header", "schema": ..., "config": {...}}``
* ``{"record": "event", "t": float, "kind": str, ...}`` in processing order.
  Kinds and their extra fields:
  ``mine`` (miner, block, height, parent), ``idle`` (miner),
  ``deliver`` (node, block), ``vote`` (node, block, shares),
  ``qc`` (node, block), ``tip`` (node, block, height),
  ``commit`` (node, block, height), ``release`` (blocks),
  ``conflict`` (node, height, old, new).
  Miner and node ids are integers, with -1 for the adversary; block hashes
  are 64-digit hex strings.
* ``{"record": "summary", ...}`` last.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import IO, Optional

SCHEMA = "crystalsim.trace/1"

_FIELDS = {
    "mine": ("miner", "block", "height", "parent"),
    "idle": ("miner",),
    "deliver": ("node", "block"),
    "vote": ("node", "block", "shares"),
    "qc": ("node", "block"),
    "tip": ("node", "block", "height"),
    "commit": ("node", "block", "height"),
    "release": ("blocks",),
    "conflict": ("node", "height", "old", "new"),
}
_HASH_FIELDS = {"block", "parent", "old", "new"}


def _hex(h: int) -> str:
    return f"{h:064x}"


@dataclass
class BlockMeta:
    hash: int
    parent: int
    height: int
    miner: int
    honest: bool
    mined_at: float
    published_at: Optional[float] = None
    certified_at: Optional[float] = None
    committee_failure: bool = False


@dataclass
class SimTrace:
    config: dict
    events: list = field(default_factory=list)
    blocks: dict = field(default_factory=dict)
    tip_log: dict = field(default_factory=dict)
    """node -> list of (time, tip height), one entry per tip change."""
    commits: dict = field(default_factory=dict)
    """node -> {height: hash} of everything the node ever committed."""
    conflicts: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def honest_blocks(self) -> list[BlockMeta]:
        return sorted((b for b in self.blocks.values() if b.honest), key=lambda b: b.mined_at)

    def event_digest(self) -> str:
        h = hashlib.sha256()
        for ev in self.events:
            h.update(repr(ev).encode())
        return h.hexdigest()

    def summary_json(self) -> str:
        return json.dumps(self.summary, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256((self.event_digest() + self.summary_json()).encode()).hexdigest()

    def event_records(self):
        for ev in self.events:
            kind, t = ev[0], ev[1]
            rec = {"record": "event", "t": t, "kind": kind}
            for name, value in zip(_FIELDS[kind], ev[2:]):
                if name in _HASH_FIELDS:
                    value = _hex(value)
                elif name == "blocks":
                    value = [_hex(v) for v in value]
                rec[name] = value
            yield rec

    def write_jsonl(self, fh: IO[str]):
        dump = lambda rec: fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")
        dump({"record": "header", "schema": SCHEMA, "config": self.config})
        for rec in self.event_records():
            dump(rec)
        dump({"record": "summary", **self.summary})


def read_jsonl(fh: IO[str]) -> tuple[dict, list[dict], dict]:
    header, events, summary = None, [], None
    for line in fh:
        rec = json.loads(line)
        kind = rec.pop("record")
        if kind == "header":
            header = rec
        elif kind == "event":
            events.append(rec)
        elif kind == "summary":
            summary = rec
    if header is None or header.get("schema") != SCHEMA:
        raise ValueError("not a crystalsim trace")
    return header, events, summary
