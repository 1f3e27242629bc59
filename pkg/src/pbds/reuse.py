"""Parameterized templates and the reuse check between two of their instances.

``Q`` is the instance a sketch was captured for (unprimed variables), ``Q'``
the incoming instance (primed variables).  Both run over the same database.
The walk builds ``psi`` relating tuples of ``Q'`` to tuples of ``Q`` and
collects obligations; selections are not checked on the way up but folded
into one final implication ``psi & conds(Q') & expr(Q) -> pred(Q)``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from . import logic as L
from .errors import ReuseError, SchemaError
from .expr import kind_of_value, norm
from .parser import parse_query
from .plan import (
    Aggregate, Cross, Dedup, Join, Project, Scan, Select, TopK, Union,
    all_kinds, bind, output_schema, plan_params, to_text, union_variants,
)
from .safety import (
    FormulaBuilder, Obligation, Opaque, check_hygiene, psi_formula, reject_nulls, universe_of,
)


@dataclass(frozen=True)
class Template:
    plan: object
    id: str
    arity: int

    @classmethod
    def of(cls, plan) -> "Template":
        params = plan_params(plan)
        arity = max(params) if params else 0
        missing = set(range(1, arity + 1)) - params
        if missing:
            raise ReuseError(f"parameters {sorted(missing)} are never referenced")
        return cls(plan, template_id(plan), arity)

    @classmethod
    def parse(cls, text: str, schemas=None) -> "Template":
        return cls.of(parse_query(text, schemas))

    @property
    def text(self) -> str:
        return to_text(self.plan)


def template_id(plan) -> str:
    return hashlib.sha1(to_text(plan).encode()).hexdigest()[:12]


def instantiate(t: Template, binding) -> object:
    binding = tuple(norm(v) for v in binding)
    if len(binding) != t.arity:
        raise ReuseError(f"template takes {t.arity} parameters, got {len(binding)}")
    return bind(t.plan, {i + 1: v for i, v in enumerate(binding)})


@dataclass
class ReuseReport:
    verdict: str  # 'Reusable' | 'Unknown'
    obligations: list = field(default_factory=list)
    psi: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def reusable(self) -> bool:
        return self.verdict == "Reusable"

    def explain(self) -> str:
        lines = [f"verdict: {self.verdict}"]
        lines += [o.explain() for o in self.obligations]
        lines += [f"note: {n}" for n in self.notes]
        psi = ", ".join(f"{a} {r} {a}'" for a, r in sorted(self.psi.items()) if r)
        lines.append(f"psi: {psi}")
        return "\n".join(lines)


def _split_group(f, group: set):
    """Conjuncts of ``f`` mentioning only group-by attributes, and the rest."""
    grp, rest = [], []
    for c in L.conjuncts(f):
        vs = {v for v in L.formula_vars(c) if not v.startswith("$")}
        (grp if vs <= group else rest).append(c)
    return L.land(*grp), L.land(*rest)


def _variants(n, n2):
    # a row of one union input is matched with a row of the same input
    return zip(union_variants(n), union_variants(n2))


class _Walker:
    def __init__(self, q, q2, stats):
        self.schemas = stats.schemas
        self.fb = FormulaBuilder(self.schemas, stats)
        self.kinds = all_kinds(q, self.schemas)
        self.universe = universe_of(self.kinds)
        self.obligations = []

    def valid(self, premise, conclusion):
        return L.is_valid(premise, conclusion, self.universe).valid

    def prove(self, operator, premise, conclusion):
        v = L.is_valid(premise, conclusion, self.universe)
        self.obligations.append(Obligation(operator, premise, conclusion, v))
        return v.valid

    def eq_all(self, attrs):
        return L.land(*(self.fb.attr_cmp("=", a, L.prime_name(a), self.kinds) for a in attrs))

    def both(self, psi, n, n2):
        """psi & conds(Q) & conds(Q')."""
        return L.land(psi_formula(psi, self.fb, self.kinds),
                      self.fb.conds(n, self.kinds), L.prime(self.fb.conds(n2, self.kinds)))

    def ge(self, n, n2) -> dict:
        if isinstance(n, Scan):
            return {a: "=" for a in self.schemas[n.relation].names}
        if isinstance(n, (Select, Project)):
            return self.ge(n.child, n2.child)
        if isinstance(n, Dedup):
            psi = self.ge(n.child, n2.child)
            names = output_schema(n, self.schemas).names
            self.prove("dedup: all attributes equal", self.both(psi, n.child, n2.child), self.eq_all(names))
            return {a: "=" for a in names}
        if isinstance(n, (Cross, Join)):
            psi = dict(self.ge(n.left, n2.left))
            psi.update(self.ge(n.right, n2.right))
            if isinstance(n, Join):
                # the incoming pair joins; the matched captured pair must join as well
                prem = L.land(self.both(psi, n.left, n2.left), self.both(psi, n.right, n2.right),
                              L.prime(self.fb.attr_cmp("=", n.left_attr, n.right_attr, self.kinds)))
                self.prove(f"join {n.left_attr} = {n.right_attr}: join attributes equal",
                           prem, self.eq_all([n.left_attr, n.right_attr]))
            return psi
        if isinstance(n, Union):
            pl, pr = self.ge(n.left, n2.left), self.ge(n.right, n2.right)
            return {a: r for a, r in pl.items() if r is not None and pr.get(a) == r}
        if isinstance(n, TopK):
            psi = self.ge(n.child, n2.child)
            self.same_rows(psi, n.child, n2.child, "topk")
            names = output_schema(n.child, self.schemas).names
            self.prove("topk: all input attributes equal", self.both(psi, n.child, n2.child),
                       self.eq_all(names))
            return psi
        if isinstance(n, Aggregate):
            return self.aggregate(n, n2)
        raise TypeError(n)

    def same_rows(self, psi, n, n2, label):
        """Both inputs admit exactly the same rows (full predicates in both directions)."""
        for v, v2 in _variants(n, n2):
            base = L.land(psi_formula(psi, self.fb, self.kinds),
                          self.fb.expr(v, self.kinds), L.prime(self.fb.expr(v2, self.kinds)))
            p, p2 = self.fb.pred(v, self.kinds), L.prime(self.fb.pred(v2, self.kinds))
            self.prove(f"{label}: incoming input rows are captured input rows", L.land(base, p2), p)
            self.prove(f"{label}: captured input rows are incoming input rows", L.land(base, p), p2)

    def aggregate(self, n, n2):
        psi = dict(self.ge(n.child, n2.child))
        c, c2 = n.child, n2.child
        full = self.both(psi, c, c2)
        if n.group_by:
            self.prove("aggregate: group-by attributes equal", full, self.eq_all(n.group_by))
        group = set(n.group_by)
        one = two = True
        for v, v2 in _variants(c, c2):
            base = L.land(psi_formula(psi, self.fb, self.kinds),
                          self.fb.expr(v, self.kinds), L.prime(self.fb.expr(v2, self.kinds)))
            p = self.fb.pred(v, self.kinds)
            p2 = L.prime(self.fb.pred(v2, self.kinds))
            g1, r1 = _split_group(p, group)
            g2, r2 = _split_group(p2, {L.prime_name(a) for a in group})
            # (1): within a shared group, every incoming row is also a captured row
            one = self.prove("aggregate: incoming group rows are captured group rows",
                             L.land(base, p2, g1), r1) and one
            two = two and self.valid(L.land(base, p, g2), r2)
        f, a = n.func, n.arg
        a_eq = a is None or self.valid(full, self.eq_all([a]))
        rel = None
        if one and two and (f == "count" or a_eq):
            rel = "="
        elif one and a_eq:
            conds = self.fb.conds(c, self.kinds)
            if f == "count":
                rel = ">="
            elif f in ("sum", "max") and self.valid(conds, L.cmp(">=", a, 0)):
                rel = ">="
            elif f in ("sum", "min") and self.valid(conds, L.cmp("<=", a, 0)):
                rel = "<="
        psi[n.out] = rel
        return psi


def _check_pair(q, q2, stats) -> ReuseReport:
    try:
        check_hygiene(q, stats.schemas)
        reject_nulls(q, stats)
    except SchemaError as e:
        return ReuseReport("Unknown", notes=[f"not analysed: {e}"])
    w = _Walker(q, q2, stats)
    try:
        psi = w.ge(q, q2)
        for v, v2 in _variants(q, q2):
            premise = L.land(psi_formula(psi, w.fb, w.kinds),
                             L.prime(w.fb.conds(v2, w.kinds)), w.fb.expr(v, w.kinds))
            w.prove("uconds: incoming conditions imply captured conditions",
                    premise, w.fb.pred(v, w.kinds))
    except Opaque as e:
        return ReuseReport("Unknown", w.obligations, notes=[f"not analysed: {e}"])
    ok = all(o.verdict.valid for o in w.obligations)
    return ReuseReport("Reusable" if ok else "Unknown", w.obligations, psi)


_CACHE: dict = {}
_CACHE_LIMIT = 100_000


def check_reusable(t: Template, b_captured, b_incoming, stats) -> ReuseReport:
    """Can a sketch captured for ``t[b_captured]`` answer ``t[b_incoming]``?"""
    bc = tuple(norm(v) for v in b_captured)
    bi = tuple(norm(v) for v in b_incoming)
    for b in (bc, bi):
        if len(b) != t.arity:
            raise ReuseError(f"template takes {t.arity} parameters, got {len(b)}")
    for x, y in zip(bc, bi):
        if (kind_of_value(x) == "str") != (kind_of_value(y) == "str"):
            raise ReuseError("bindings disagree on parameter kinds")
    key = (t.id, _typed(bc), _typed(bi), id(stats))
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is stats:
        return hit[1]
    q, q2 = instantiate(t, bc), instantiate(t, bi)
    output_schema(q, stats.schemas)
    report = _check_pair(q, q2, stats)
    if len(_CACHE) > _CACHE_LIMIT:
        _CACHE.clear()
    _CACHE[key] = (stats, report)
    return report


def _typed(b):
    return tuple((type(v).__name__, v) for v in b)


def find_reusable(entries, t: Template, b_incoming, stats):
    """Tightest catalog entry for template ``t`` whose sketch may answer ``t[b_incoming]``."""
    best = None
    for e in entries:
        if e.template_id != t.id or not e.safe:
            continue
        if not check_reusable(t, e.binding, b_incoming, stats).reusable:
            continue
        if best is None or e.bits() < best.bits():
            best = e
    return best
