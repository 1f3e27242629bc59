"""Random databases, plans, templates and partitions for property testing.

Plans are built so that attribute names are never reused along one branch,
every relation is scanned at most once, and all operators type-check.
"""
from __future__ import annotations

import random

from .expr import Attr, BinOp, Cmp, Const, Not, Param, conj, disj
from .partition import RangePartition
from .plan import (
    Aggregate, Cross, Dedup, Join, Project, Scan, Select, TopK, Union, output_schema,
)
from .relation import Relation

BASE = {
    "R": (("a", "int"), ("b", "int"), ("s", "str")),
    "S": (("c", "int"), ("d", "int"), ("t", "str")),
    "T": (("e", "int"), ("f", "int"), ("u", "str")),
}
STRINGS = ("ak", "ca", "ny", "tx", "wa")
INT_RANGE = (-3, 9)


def random_db(rng: random.Random, max_rows: int = 64, relations=BASE) -> dict:
    db = {}
    lo, hi = INT_RANGE
    # narrow domains make ties, duplicates and empty groups common
    for name, attrs in relations.items():
        n = rng.randint(0, max_rows)
        span = rng.choice((3, 6, hi - lo))
        rows = []
        for _ in range(n):
            rows.append(tuple(rng.choice(STRINGS[: rng.randint(2, 5)]) if k == "str"
                              else rng.randint(lo, lo + span) for _, k in attrs))
        db[name] = Relation.from_rows(name, attrs, rows)
    return db


def random_partition(rng: random.Random, rel: Relation, attr: str, max_fragments: int = 8,
                     min_fragments: int = 2) -> RangePartition:
    k = rng.randint(min_fragments, max_fragments)
    kind = rel.schema.kinds[attr]
    if kind == "str":
        pool = sorted(set(STRINGS) | {"b", "m", "p"})
    else:
        pool = list(range(INT_RANGE[0] - 1, INT_RANGE[1] + 1))
    bounds = sorted(rng.sample(pool, min(k - 1, len(pool))))
    return RangePartition(rel.name, attr, tuple(bounds))


class PlanGen:
    """Random well-typed plans of bounded depth.

    With ``params=True`` selection constants are sometimes replaced by
    parameters ``$1..$n``; :attr:`param_kinds` records their kinds.
    """

    def __init__(self, rng: random.Random, schemas: dict, max_depth: int = 4, params: bool = False):
        self.rng = rng
        self.schemas = schemas
        self.max_depth = max_depth
        self.params = params
        self.param_kinds = {}
        self._names = 0
        self.unused = list(schemas)

    def fresh(self, prefix="x"):
        self._names += 1
        return f"{prefix}{self._names}"

    # ---------------------------------------------------------- conditions
    def const(self, kind):
        if kind == "str":
            return Const(self.rng.choice(STRINGS + ("b", "m")))
        return Const(self.rng.randint(INT_RANGE[0] - 1, INT_RANGE[1] + 2))

    def operand(self, kind):
        if self.params and self.rng.random() < 0.6:
            i = len(self.param_kinds) + 1
            self.param_kinds[i] = kind
            return Param(i)
        return self.const(kind)

    def atom(self, attrs):
        a, k = self.rng.choice(attrs)
        op = self.rng.choice(("=", "<>", "<", "<=", ">", ">="))
        same = [(b, kb) for b, kb in attrs if b != a and (kb == "str") == (k == "str")]
        if same and self.rng.random() < 0.25:
            b, _ = self.rng.choice(same)
            return Cmp(op, Attr(a), Attr(b))
        if k != "str" and self.rng.random() < 0.15:
            nums = [b for b, kb in attrs if kb != "str"]
            return Cmp(op, BinOp("+", Attr(a), Attr(self.rng.choice(nums))), self.operand(k))
        return Cmp(op, Attr(a), self.operand("str" if k == "str" else "num"))

    def cond(self, attrs, depth=0):
        r = self.rng.random()
        if depth < 2 and r < 0.2:
            return conj(self.cond(attrs, depth + 1), self.cond(attrs, depth + 1))
        if depth < 2 and r < 0.3:
            return disj(self.cond(attrs, depth + 1), self.cond(attrs, depth + 1))
        if depth < 2 and r < 0.33:
            return Not(self.atom(attrs))
        return self.atom(attrs)

    # --------------------------------------------------------------- plans
    def plan(self):
        for _ in range(50):
            self.unused = list(self.schemas)
            self.param_kinds = {}
            p = self.node(self.rng.randint(1, self.max_depth))
            if p is not None:
                output_schema(p, self.schemas)
                return p
        raise RuntimeError("could not build a plan")

    def template(self):
        """A plan with at least one parameter (wrapped in a selection if needed)."""
        assert self.params
        p = self.plan()
        if not self.param_kinds:
            p = Select(self.atom(self.attrs_of(p)), p)
            if not self.param_kinds:
                a, k = self.rng.choice(self.attrs_of(p.child))
                self.param_kinds[1] = "str" if k == "str" else "num"
                p = Select(Cmp(self.rng.choice(("<", ">=", "=")), Attr(a), Param(1)), p.child)
        return p

    def scan(self):
        if not self.unused:
            return None
        rel = self.rng.choice(self.unused)
        self.unused.remove(rel)
        return Scan(rel)

    def attrs_of(self, p):
        return output_schema(p, self.schemas).attrs

    def node(self, depth):
        if depth <= 1:
            return self.scan()
        op = self.rng.choices(
            ("select", "project", "dedup", "cross", "join", "union", "agg", "topk"),
            (4, 2, 1, 1, 2, 1, 4, 2))[0]
        if op in ("cross", "join", "union"):
            if len(self.unused) < 2:
                op = "select"
            else:
                return getattr(self, "_" + op)(depth)
        child = self.node(depth - 1)
        if child is None:
            return None
        return getattr(self, "_" + op)(child)

    def _select(self, child):
        return Select(self.cond(self.attrs_of(child)), child)

    def _project(self, child):
        attrs = self.attrs_of(child)
        keep = self.rng.sample(attrs, self.rng.randint(1, len(attrs)))
        items = [(Attr(a), a) for a, _ in keep]
        nums = [a for a, k in attrs if k != "str"]
        if nums and self.rng.random() < 0.5:
            a = self.rng.choice(nums)
            e = self.rng.choice((
                BinOp("+", Attr(a), Const(self.rng.randint(-2, 3))),
                BinOp("*", Const(self.rng.choice((-1, 2))), Attr(a)),
                BinOp("+", Attr(a), Attr(self.rng.choice(nums))),
            ))
            items.append((e, self.fresh("p")))
        return Project(tuple(items), child)

    def _dedup(self, child):
        return Dedup(child)

    def _cross(self, depth):
        l = self.node(depth - 1)
        r = self.node(depth - 1)
        if l is None or r is None:
            return l or r
        return Cross(l, r)

    def _join(self, depth):
        l = self.node(depth - 1)
        r = self.node(depth - 1)
        if l is None or r is None:
            return l or r
        la = [a for a, k in self.attrs_of(l) if k != "str"]
        ra = [a for a, k in self.attrs_of(r) if k != "str"]
        if not la or not ra or self.rng.random() < 0.2:
            ls = [a for a, k in self.attrs_of(l) if k == "str"]
            rs = [a for a, k in self.attrs_of(r) if k == "str"]
            if ls and rs:
                return Join(self.rng.choice(ls), self.rng.choice(rs), l, r)
            if not la or not ra:
                return Cross(l, r)
        return Join(self.rng.choice(la), self.rng.choice(ra), l, r)

    def _union(self, depth):
        l = self.node(depth - 1)
        if l is None or not self.unused:
            return l
        r = self.scan()
        lattrs = self.attrs_of(l)
        rattrs = list(self.attrs_of(r))
        items = []
        for name, k in lattrs:
            cands = [b for b, kb in rattrs if (kb == "str") == (k == "str")]
            if not cands:
                return l
            items.append((Attr(self.rng.choice(cands)), name))
        right = Project(tuple(items), r)
        if self.rng.random() < 0.5:
            right = Select(self.cond(self.attrs_of(right)), right)
        return Union(l, right)

    def _agg(self, child):
        attrs = self.attrs_of(child)
        nums = [a for a, k in attrs if k != "str"]
        gb = tuple(a for a, _ in self.rng.sample(attrs, self.rng.randint(0, min(2, len(attrs)))))
        funcs = ["count"] + (["sum", "avg", "min", "max"] if nums else [])
        f = self.rng.choice(funcs)
        arg = None if f == "count" and self.rng.random() < 0.5 else self.rng.choice(nums or [a for a, _ in attrs])
        out = self.fresh("g")
        agg = Aggregate(gb, f, arg, out, child)
        if self.rng.random() < 0.4:
            return Select(self.cond([(out, "int")] + [(g, dict(attrs)[g]) for g in gb]), agg)
        return agg

    def _topk(self, child):
        attrs = self.attrs_of(child)
        keys = tuple((a, self.rng.random() < 0.5)
                     for a, _ in self.rng.sample(attrs, self.rng.randint(1, min(2, len(attrs)))))
        return TopK(keys, self.rng.randint(0, 4), child)


def random_binding(rng: random.Random, param_kinds: dict) -> tuple:
    out = []
    for i in sorted(param_kinds):
        if param_kinds[i] == "str":
            out.append(rng.choice(STRINGS + ("b", "m")))
        else:
            out.append(rng.randint(INT_RANGE[0] - 1, INT_RANGE[1] + 2))
    return tuple(out)


def nearby_binding(rng: random.Random, b: tuple, param_kinds: dict) -> tuple:
    """A binding equal to ``b`` in most positions, with small numeric moves."""
    out = list(b)
    for j, i in enumerate(sorted(param_kinds)):
        if rng.random() < 0.5:
            continue
        if param_kinds[i] == "str":
            out[j] = rng.choice(STRINGS + ("b", "m"))
        else:
            out[j] = out[j] + rng.choice((-2, -1, 1, 2))
    return tuple(out)
