"""Data skipping: sketches as selection predicates over the scanned relations."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import SketchError
from .evaluate import eval_plan
from .expr import FALSE, TRUE, Attr, Cmp, Const, Member, conj, disj
from .partition import fragment_of, fragment_vector
from .plan import Scan, Select, children, scanned, with_children
from .sketch import BitSketch, restrict_relation


def runs(indices) -> list:
    """Maximal runs ``(first, last)`` of consecutive fragment indices."""
    out = []
    for i in sorted(indices):
        if out and out[-1][1] == i - 1:
            out[-1] = (out[-1][0], i)
        else:
            out.append((i, i))
    return out


def _range(p, first, last):
    a = Attr(p.attribute)
    parts = []
    if first > 1:
        parts.append(Cmp(">", a, Const(p.boundaries[first - 2])))
    if last < p.size:
        parts.append(Cmp("<=", a, Const(p.boundaries[last - 1])))
    return conj(*parts)


def sketch_to_predicate(s: BitSketch, merge: bool = True):
    """Disjunction of boundary ranges covering the sketch's fragments."""
    idx = s.indices()
    if not idx:
        return FALSE
    if len(idx) == s.n:
        return TRUE
    spans = runs(idx) if merge else [(i, i) for i in idx]
    return disj(*(_range(s.partition, a, b) for a, b in spans))


def member(s: BitSketch, v) -> bool:
    """Is ``v``'s fragment in ``s``? Binary search over the boundaries."""
    return s.is_set(fragment_of(s.partition, v))


def member_condition(s: BitSketch) -> Member:
    return Member(s.partition.attribute, lambda v, s=s: member(s, v),
                  f"{s.partition.attribute} in sketch {s.to_hex()}")


def quse(plan, sketchset: dict, use_member: bool = False):
    """Put a sketch selection on top of every scan of a sketched relation."""
    rels = set(scanned(plan))
    for rel in sketchset:
        if rel not in rels:
            raise SketchError(f"sketch relation {rel} is not scanned by the plan")

    def go(n):
        if isinstance(n, Scan):
            s = sketchset.get(n.relation)
            if s is None:
                return n
            cond = member_condition(s) if use_member else sketch_to_predicate(s)
            return Select(cond, n)
        return with_children(n, [go(c) for c in children(n)])

    return go(plan)


@dataclass(frozen=True)
class ScanCount:
    relation: str
    scanned: int
    total: int

    @property
    def fraction(self) -> float:
        return self.scanned / self.total if self.total else 0.0


class FragmentIndex:
    """Cached fragment numbers per (relation, partition) so repeated skipping is cheap."""

    def __init__(self):
        self._cache = {}

    def vector(self, partition, rel):
        key = (partition.ref, id(rel))
        hit = self._cache.get(key)
        if hit is None or hit[0] is not rel:
            hit = (rel, fragment_vector(partition, rel))
            self._cache[key] = hit
        return hit[1]


def run_skipping(plan, db: dict, sketchset: dict, index: FragmentIndex | None = None):
    """Evaluate ``plan`` reading only sketched fragments.

    Returns the result and a :class:`ScanCount` per sketched relation.
    """
    index = index or FragmentIndex()
    sub = dict(db)
    counts = []
    for rel, s in sketchset.items():
        full = db[rel]
        r = restrict_relation(full, s, index.vector(s.partition, full))
        sub[rel] = r
        counts.append(ScanCount(rel, len(r.rows), len(full.rows)))
    return eval_plan(plan, sub), counts
