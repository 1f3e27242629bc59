"""Sketch catalog: captured sketches with their template, binding and flags.

Persisted as JSON lines; writers take an exclusive ``fcntl`` lock on the file.
"""
from __future__ import annotations

import fcntl
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field

from .errors import PBDSError
from .partition import RangePartition, tag_value, untag_value
from .sketch import BitSketch, SketchSet


class CatalogError(PBDSError):
    pass


@dataclass
class CatalogEntry:
    id: str
    template_id: str
    template: str
    binding: tuple
    attrs: tuple            # ("R.a", ...)
    sketches: SketchSet
    safe: bool
    topk_min_rows: tuple = ()
    selectivity: float = 0.0
    captured_at: int = 0
    uses: int = 0
    forced: bool = False

    def bits(self) -> int:
        return sum(s.count() for s in self.sketches.values())

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "template_id": self.template_id,
            "template": self.template,
            "binding": [tag_value(v) for v in self.binding],
            "attrs": list(self.attrs),
            "sketches": {rel: {"partition": s.partition.to_json(), "bits": s.to_hex()}
                         for rel, s in sorted(self.sketches.items())},
            "safe": self.safe,
            "forced": self.forced,
            "topk_min_rows": list(self.topk_min_rows),
            "selectivity": self.selectivity,
            "captured_at": self.captured_at,
            "uses": self.uses,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CatalogEntry":
        sk = SketchSet()
        for rel, s in d["sketches"].items():
            sk[rel] = BitSketch.from_hex(RangePartition.from_json(s["partition"]), s["bits"])
        return cls(d["id"], d["template_id"], d["template"],
                   tuple(untag_value(v) for v in d["binding"]), tuple(d["attrs"]), sk,
                   d["safe"], tuple(d.get("topk_min_rows", ())), d.get("selectivity", 0.0),
                   d.get("captured_at", 0), d.get("uses", 0), d.get("forced", False))


@dataclass
class Catalog:
    entries: list = field(default_factory=list)
    path: str | None = None

    def next_id(self) -> str:
        nums = [int(e.id[2:]) for e in self.entries if e.id[2:].isdigit()]
        return f"ps{max(nums, default=0) + 1}"

    def next_seq(self) -> int:
        return max((e.captured_at for e in self.entries), default=0) + 1

    def get(self, entry_id: str) -> CatalogEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise CatalogError(f"no catalog entry {entry_id!r}")

    def add(self, entry: CatalogEntry):
        self.entries.append(entry)
        if self.path:
            with _locked(self.path, "a") as fh:
                fh.write(json.dumps(entry.to_json(), sort_keys=True) + "\n")

    def drop(self, entry_id: str):
        self.get(entry_id)
        self.entries = [e for e in self.entries if e.id != entry_id]
        self.save()

    def save(self):
        """Rewrite the whole file (compaction)."""
        if not self.path:
            return
        with _locked(self.path, "a+") as fh:
            fh.seek(0)
            fh.truncate()
            for e in self.entries:
                fh.write(json.dumps(e.to_json(), sort_keys=True) + "\n")

    @classmethod
    def open(cls, path: str) -> "Catalog":
        entries = []
        if os.path.exists(path):
            with _locked(path, "r", shared=True) as fh:
                for n, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        entries.append(CatalogEntry.from_json(json.loads(line)))
                    except (ValueError, KeyError) as e:
                        raise CatalogError(f"{path}:{n}: bad catalog line ({e})") from e
        return cls(entries, path)


@contextmanager
def _locked(path, mode, shared=False):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, mode, encoding="utf-8") as fh:
        fcntl.flock(fh, fcntl.LOCK_SH if shared else fcntl.LOCK_EX)
        try:
            yield fh
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)
