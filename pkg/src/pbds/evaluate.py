"""Bag-semantics evaluator.

One evaluator serves three purposes through a small *tracker* protocol:
plain evaluation, lineage tracking (the provenance oracle) and sketch capture
(see :mod:`pbds.capture`).  Internally every row is a triple
``(values, key, annotation)`` where ``key`` is a nested tuple of source row
ordinals used only to make the top-k order total on duplicate tuples.
"""
from __future__ import annotations

import heapq
from fractions import Fraction

from .errors import PlanTypeError, SchemaError, UnboundParameterError
from .expr import compile_cond, compile_expr, norm
from .plan import output_schema, plan_params
from .relation import Relation


class PlainTracker:
    """No annotations."""

    def leaf(self, rel, ordinal, rowid):
        return None

    def join(self, a, b):
        return None

    def merge(self, anns):
        return None

    def extreme(self, anns, chosen):
        return None


class LineageTracker:
    """Annotations are frozensets of ``(relation, row-id)`` pairs."""

    def leaf(self, rel, ordinal, rowid):
        return frozenset(((rel, rowid),))

    def join(self, a, b):
        return a | b

    def merge(self, anns):
        if len(anns) == 1:
            return anns[0]
        return frozenset().union(*anns)

    def extreme(self, anns, chosen):
        # lineage keeps every row of the group, including for min/max
        return self.merge(anns)


# ------------------------------------------------------------------- ordering

class _Rev:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return other.v < self.v

    def __gt__(self, other):
        return other.v > self.v

    def __eq__(self, other):
        return self.v == other.v


def _asc(v):
    return (0,) if v is None else (1, v)


def _desc(v):
    if v is None:
        return (2,)
    if isinstance(v, str):
        return (1, _Rev(v))
    return (1, -v)


def order_key_fn(schema, keys):
    """Sort key for the total top-k order: order keys, remaining attributes, source key."""
    idx = schema.index()
    key_pos = [(idx[a], desc) for a, desc in keys]
    used = {i for i, _ in key_pos}
    rest = [i for i in range(len(schema.attrs)) if i not in used]

    def fn(row):
        vals = row[0]
        return (
            tuple(_desc(vals[i]) if d else _asc(vals[i]) for i, d in key_pos),
            tuple(_asc(vals[i]) for i in rest),
            row[1],
        )
    return fn


# ----------------------------------------------------------------- evaluation

class Evaluator:
    def __init__(self, db: dict, tracker=None):
        self.db = db
        self.tracker = tracker or PlainTracker()
        self.schemas = {n: r.schema for n, r in db.items()}

    def run(self, plan):
        params = plan_params(plan)
        if params:
            raise UnboundParameterError(f"unbound parameters: {sorted(params)}")
        schema = output_schema(plan, self.schemas)
        rows = self._eval(plan)
        return schema, rows

    # each _eval returns a list of (values, key, ann)
    def _eval(self, p):
        m = getattr(self, "_" + type(p).__name__.lower())
        return m(p)

    def _scan(self, p):
        rel = self.db[p.relation]
        leaf = self.tracker.leaf
        name = p.relation
        return [(vals, i, leaf(name, i, rid)) for i, (vals, rid) in enumerate(zip(rel.rows, rel.ids))]

    def _select(self, p):
        rows = self._eval(p.child)
        schema = output_schema(p.child, self.schemas)
        f = compile_cond(p.cond, schema.index())
        return [r for r in rows if f(r[0])]

    def _project(self, p):
        rows = self._eval(p.child)
        schema = output_schema(p.child, self.schemas)
        idx = schema.index()
        fs = [compile_expr(e, idx) for e, _ in p.items]
        return [(tuple(f(r[0]) for f in fs), r[1], r[2]) for r in rows]

    def _dedup(self, p):
        rows = self._eval(p.child)
        groups = {}
        for r in rows:
            groups.setdefault(r[0], []).append(r)
        merge = self.tracker.merge
        out = []
        for vals, grp in groups.items():
            out.append((vals, min(g[1] for g in grp), merge([g[2] for g in grp])))
        return out

    def _cross(self, p):
        left = self._eval(p.left)
        right = self._eval(p.right)
        join = self.tracker.join
        return [(l[0] + r[0], (l[1], r[1]), join(l[2], r[2])) for l in left for r in right]

    def _join(self, p):
        left = self._eval(p.left)
        right = self._eval(p.right)
        li = output_schema(p.left, self.schemas).position(p.left_attr)
        ri = output_schema(p.right, self.schemas).position(p.right_attr)
        index = {}
        for r in right:
            v = r[0][ri]
            if v is not None:
                index.setdefault(v, []).append(r)
        join = self.tracker.join
        out = []
        for l in left:
            v = l[0][li]
            if v is None:
                continue
            for r in index.get(v, ()):
                out.append((l[0] + r[0], (l[1], r[1]), join(l[2], r[2])))
        return out

    def _union(self, p):
        left = self._eval(p.left)
        right = self._eval(p.right)
        return [(r[0], (0, r[1]), r[2]) for r in left] + [(r[0], (1, r[1]), r[2]) for r in right]

    def _aggregate(self, p):
        rows = self._eval(p.child)
        schema = output_schema(p.child, self.schemas)
        idx = schema.index()
        gpos = [idx[g] for g in p.group_by]
        groups = {}
        for r in rows:
            groups.setdefault(tuple(r[0][i] for i in gpos), []).append(r)
        apos = None if p.arg is None else idx[p.arg]
        tr = self.tracker
        total = order_key_fn(schema, ())
        out = []
        for g, grp in groups.items():
            anns = [r[2] for r in grp]
            if p.func in ("min", "max"):
                vals = [r[0][apos] for r in grp if r[0][apos] is not None]
                if not vals:
                    value, ann = None, tr.merge(anns)
                else:
                    value = min(vals) if p.func == "min" else max(vals)
                    ties = [r for r in grp if r[0][apos] is not None and r[0][apos] == value]
                    chosen = min(ties, key=total)
                    ann = tr.extreme(anns, chosen[2])
            else:
                value = _fold(p.func, grp, apos)
                ann = tr.merge(anns)
            out.append((g + (value,), g, ann))
        return out

    def _topk(self, p):
        rows = self._eval(p.child)
        schema = output_schema(p.child, self.schemas)
        key = order_key_fn(schema, p.keys)
        if p.count >= len(rows):
            return sorted(rows, key=key)
        return heapq.nsmallest(p.count, rows, key=key)


def _fold(func, grp, apos):
    if func == "count":
        if apos is None:
            return len(grp)
        return sum(1 for r in grp if r[0][apos] is not None)
    vals = [r[0][apos] for r in grp if r[0][apos] is not None]
    if not vals:
        return None
    for v in vals:
        if isinstance(v, str):
            raise PlanTypeError(f"{func} over a string value")
    s = sum(vals)
    if func == "sum":
        return norm(s)
    return norm(Fraction(s) / len(vals))  # avg


def _to_relation(schema, rows) -> Relation:
    return Relation(schema.renamed("result"), tuple(r[0] for r in rows),
                    tuple(f"r{i + 1}" for i in range(len(rows))))


def eval_plan(plan, db: dict) -> Relation:
    """Evaluate a bound plan over ``db`` (relation name -> Relation)."""
    schema, rows = Evaluator(db).run(plan)
    return _to_relation(schema, rows)


def eval_with_lineage(plan, db: dict):
    """Return ``(result, lineages)``; ``lineages[i]`` belongs to ``result.rows[i]``."""
    schema, rows = Evaluator(db, LineageTracker()).run(plan)
    return _to_relation(schema, rows), [r[2] for r in rows]


def whole_lineage(plan, db: dict) -> frozenset:
    _, lin = eval_with_lineage(plan, db)
    return frozenset().union(*lin) if lin else frozenset()


def restrict_db(db: dict, lineage) -> dict:
    """Keep only rows named in ``lineage`` for every relation."""
    keep = {}
    for rel, rid in lineage:
        keep.setdefault(rel, set()).add(rid)
    return {n: r.restrict(keep.get(n, ())) for n, r in db.items()}


__all__ = [
    "Evaluator", "PlainTracker", "LineageTracker", "eval_plan", "eval_with_lineage",
    "whole_lineage", "restrict_db", "order_key_fn", "SchemaError",
]
