"""Static attribute-safety checking.

For a plan ``Q`` and attribute set ``X`` the checker walks the plan bottom-up
and maintains ``psi``: for every attribute ``a`` an optional relation
``a op a'`` between a result tuple computed over a sketch instance (``a``)
and its matched tuple computed over the full database (``a'``).  Operators
that could break the matching produce proof obligations that are discharged
by :func:`pbds.logic.is_valid`.  The verdict is ``Safe`` only when every
obligation is ``Valid``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import logic as L
from .errors import PBDSError, SchemaError
from .expr import And, Attr, BinOp, BoolConst, Cmp, Const, Member, Neg, Not, Or, Param
from .plan import (
    Aggregate, Cross, Dedup, Join, Project, Scan, Select, TopK, Union,
    all_kinds, children, output_schema, scanned, to_text, walk,
)


class Opaque(PBDSError):
    """A plan fragment that cannot be expressed as a linear formula."""


# ---------------------------------------------------------------- conversion

def _pname(index) -> str:
    return f"${index}"


class FormulaBuilder:
    """Translate plan conditions and expressions into :mod:`pbds.logic` formulas."""

    def __init__(self, schemas: dict, stats=None):
        self.schemas = schemas
        self.stats = stats
        self._kinds_cache = {}

    def kinds(self, plan) -> dict:
        key = id(plan)
        if key not in self._kinds_cache:
            self._kinds_cache[key] = (plan, all_kinds(plan, self.schemas))
        return self._kinds_cache[key][1]

    # terms are ('num', Lin) | ('str', SVar | str) | ('param', name)
    def term(self, e, kinds):
        if isinstance(e, Attr):
            if kinds.get(e.name) == "str":
                return ("str", L.SVar(e.name))
            return ("num", L.var(e.name))
        if isinstance(e, Const):
            if isinstance(e.value, str):
                return ("str", e.value)
            if e.value is None:
                raise Opaque("null constant")
            return ("num", L.lin(Fraction(e.value)))
        if isinstance(e, Param):
            return ("param", _pname(e.index))
        if isinstance(e, Neg):
            k, t = self._numeric(self.term(e.operand, kinds))
            return ("num", t.scale(-1))
        if isinstance(e, BinOp):
            lt = self._numeric(self.term(e.left, kinds))[1]
            rt = self._numeric(self.term(e.right, kinds))[1]
            if e.op == "+":
                return ("num", lt + rt)
            if e.op == "-":
                return ("num", lt - rt)
            if not lt.coeffs:
                return ("num", rt.scale(lt.const))
            if not rt.coeffs:
                return ("num", lt.scale(rt.const))
            raise Opaque("non-linear product")
        raise Opaque(f"unsupported expression {e!r}")

    @staticmethod
    def _numeric(t):
        kind, v = t
        if kind == "param":
            return "num", L.var(v)
        if kind != "num":
            raise Opaque("string in arithmetic")
        return kind, v

    def compare(self, op, lt, rt):
        lk, rk = lt[0], rt[0]
        if "str" in (lk, rk):
            side = lambda t: L.SVar(t[1]) if t[0] == "param" else t[1]  # noqa: E731
            if "num" in (lk, rk):
                raise Opaque("string compared with number")
            return L.SAtom(op, side(lt), side(rt))
        return L.cmp(op, self._numeric(lt)[1], self._numeric(rt)[1])

    def cond(self, c, kinds):
        if isinstance(c, BoolConst):
            return L.TRUE if c.value else L.FALSE
        if isinstance(c, Cmp):
            return self.compare(c.op, self.term(c.left, kinds), self.term(c.right, kinds))
        if isinstance(c, And):
            return L.land(*(self.cond(i, kinds) for i in c.items))
        if isinstance(c, Or):
            return L.lor(*(self.cond(i, kinds) for i in c.items))
        if isinstance(c, Not):
            return L.lnot(self.cond(c.item, kinds))
        if isinstance(c, Member):
            raise Opaque("membership tests have no linear form")
        raise Opaque(f"unsupported condition {c!r}")

    def attr_cmp(self, op, a, b, kinds):
        """``a op b`` for two attribute variable names of the same kind."""
        base = a.rstrip("'")
        if kinds.get(base) == "str":
            return L.SAtom(op, L.SVar(a), L.SVar(b))
        return L.cmp(op, L.var(a), L.var(b))

    # ------------------------------------------------------- pred and expr
    def bounds(self, relation):
        out = []
        for a, k in self.schemas[relation].attrs:
            b = self.stats.bounds(relation, a) if self.stats is not None else None
            if b is None:
                continue
            lo, hi = b
            if k == "str":
                out += [L.SAtom(">=", L.SVar(a), lo), L.SAtom("<=", L.SVar(a), hi)]
            else:
                out += [L.cmp(">=", a, Fraction(lo)), L.cmp("<=", a, Fraction(hi))]
        return L.land(*out)

    def pred(self, p, kinds=None):
        kinds = kinds if kinds is not None else self.kinds(p)
        if isinstance(p, Scan):
            return self.bounds(p.relation)
        if isinstance(p, Select):
            return L.land(self.pred(p.child, kinds), self.cond(p.cond, kinds))
        if isinstance(p, Cross):
            return L.land(self.pred(p.left, kinds), self.pred(p.right, kinds))
        if isinstance(p, Join):
            return L.land(self.pred(p.left, kinds), self.pred(p.right, kinds),
                          self.attr_cmp("=", p.left_attr, p.right_attr, kinds))
        if isinstance(p, Union):
            return L.lor(self.pred(p.left, kinds), self.pred(p.right, kinds))
        return self.pred(p.child, kinds)

    def expr(self, p, kinds=None):
        kinds = kinds if kinds is not None else self.kinds(p)
        if isinstance(p, Scan):
            return L.TRUE
        if isinstance(p, Project):
            eqs = []
            for e, name in p.items:
                t = self.term(e, kinds)
                target = ("str", L.SVar(name)) if kinds.get(name) == "str" else ("num", L.var(name))
                eqs.append(self.compare("=", t, target))
            return L.land(self.expr(p.child, kinds), *eqs)
        if isinstance(p, (Cross, Join)):
            return L.land(self.expr(p.left, kinds), self.expr(p.right, kinds))
        if isinstance(p, Union):
            return L.lor(self.expr(p.left, kinds), self.expr(p.right, kinds))
        return self.expr(p.child, kinds)

    def conds(self, p, kinds=None):
        kinds = kinds if kinds is not None else self.kinds(p)
        return L.land(self.pred(p, kinds), self.expr(p, kinds))


def psi_formula(psi: dict, fb: FormulaBuilder, kinds: dict):
    atoms = []
    for a, rel in sorted(psi.items()):
        if rel is not None:
            atoms.append(fb.attr_cmp(rel, a, L.prime_name(a), kinds))
    return L.land(*atoms)


def universe_of(kinds: dict) -> dict:
    u = {}
    for a, k in kinds.items():
        u[a] = k
        u[L.prime_name(a)] = k
    return u


# ------------------------------------------------------------- name hygiene

def subtree_names(p, schemas) -> set:
    return set(all_kinds(p, schemas))


def check_hygiene(p, schemas):
    """Formulas identify attributes by name; reject plans where one name means two things."""
    for n in walk(p):
        if isinstance(n, Project):
            inner = subtree_names(n.child, schemas)
            for e, name in n.items:
                if name in inner and e != Attr(name):
                    raise SchemaError(f"projection redefines attribute {name!r}")
        elif isinstance(n, Aggregate):
            if n.out in subtree_names(n.child, schemas):
                raise SchemaError(f"aggregate output {n.out!r} reuses an input name")
        elif isinstance(n, (Cross, Join)):
            clash = subtree_names(n.left, schemas) & subtree_names(n.right, schemas)
            if clash:
                raise SchemaError(f"attribute names {sorted(clash)} used on both sides of a product")


def reject_nulls(p, stats):
    """Formulas have no null values; data containing nulls is not analysed."""
    for rel in set(scanned(p)):
        if stats.has_nulls(rel):
            raise SchemaError(f"relation {rel} contains nulls")


# -------------------------------------------------------- generalization

def generalize(p):
    """Replace additive constants in selection conditions by fresh parameters.

    Verdicts computed on the generalized plan cannot depend on the binding of
    a parameterized query.
    """
    counter = [0]

    def fresh():
        counter[0] += 1
        return Param(f"g{counter[0]}")

    def gexpr(e):
        if isinstance(e, Const):
            return fresh()
        if isinstance(e, BinOp):
            if e.op == "*":
                return e
            return BinOp(e.op, gexpr(e.left), gexpr(e.right))
        if isinstance(e, Neg):
            return Neg(gexpr(e.operand))
        return e

    def gcond(c):
        if isinstance(c, Cmp):
            return Cmp(c.op, gexpr(c.left), gexpr(c.right))
        if isinstance(c, And):
            return And(tuple(gcond(i) for i in c.items))
        if isinstance(c, Or):
            return Or(tuple(gcond(i) for i in c.items))
        if isinstance(c, Not):
            return Not(gcond(c.item))
        return c

    def go(n):
        if isinstance(n, Select):
            return Select(gcond(n.cond), go(n.child))
        from .plan import with_children
        return with_children(n, [go(c) for c in children(n)])

    return go(p)


# ------------------------------------------------------------------- report

@dataclass
class Obligation:
    operator: str
    premise: object
    conclusion: object
    verdict: L.Verdict

    def explain(self) -> str:
        return (f"[{self.verdict}] {self.operator}\n"
                f"    premise:    {L.to_sexpr(self.premise)}\n"
                f"    conclusion: {L.to_sexpr(self.conclusion)}")


@dataclass
class SafetyReport:
    verdict: str  # 'Safe' | 'Unknown'
    obligations: list = field(default_factory=list)
    psi: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    topk_min_rows: list = field(default_factory=list)  # runtime re-validation flags

    @property
    def safe(self) -> bool:
        return self.verdict == "Safe"

    def explain(self) -> str:
        lines = [f"verdict: {self.verdict}"]
        lines += [o.explain() for o in self.obligations]
        lines += [f"note: {n}" for n in self.notes]
        if self.topk_min_rows:
            lines.append("runtime check: top-k inputs must return at least "
                         + ", ".join(str(c) for c in self.topk_min_rows) + " rows")
        psi = ", ".join(f"{a} {r} {a}'" for a, r in sorted(self.psi.items()) if r)
        lines.append(f"psi: {psi}")
        return "\n".join(lines)


# ------------------------------------------------------------------ checker

class _Checker:
    def __init__(self, plan, X, stats):
        self.plan = plan
        self.stats = stats
        self.schemas = stats.schemas
        self.fb = FormulaBuilder(self.schemas, stats)
        self.kinds = all_kinds(plan, self.schemas)
        self.universe = universe_of(self.kinds)
        self.xrels = {}
        for rel, a in X:
            self.xrels.setdefault(rel, set()).add(a)
        self.obligations = []
        self.topk = []

    def prove(self, operator, premise, conclusion):
        v = L.is_valid(premise, conclusion, self.universe)
        self.obligations.append(Obligation(operator, premise, conclusion, v))
        return v.valid

    def premise(self, psi, node):
        c = self.fb.conds(node, self.kinds)
        return L.land(psi_formula(psi, self.fb, self.kinds), c, L.prime(c))

    def eq_all(self, attrs):
        return L.land(*(self.fb.attr_cmp("=", a, L.prime_name(a), self.kinds) for a in attrs))

    def derive(self, psi, node, attr):
        """Strongest of =, <=, >= provable between ``attr`` and ``attr'``."""
        prem = self.premise(psi, node)
        for op in ("=", "<=", ">="):
            concl = self.fb.attr_cmp(op, attr, L.prime_name(attr), self.kinds)
            if L.is_valid(prem, concl, self.universe).valid:
                return op
        return None

    def x_in(self, node) -> set:
        out = set()
        for rel in scanned(node):
            out |= self.xrels.get(rel, set())
        return out

    def gc(self, node, complete: bool = True) -> dict:
        """``complete``: every output row of ``node`` reaches the lineage of the
        final result whenever that result is non-empty."""
        if not self.x_in(node):
            return {a: "=" for a in subtree_names(node, self.schemas)}
        if isinstance(node, Scan):
            return {a: "=" for a in self.schemas[node.relation].names}
        if isinstance(node, Select):
            psi = self.gc(node.child, False)
            theta = self.fb.cond(node.cond, self.kinds)
            self.prove(f"select {to_text(node)[:80]}",
                       L.land(self.premise(psi, node.child), theta), L.prime(theta))
            return psi
        if isinstance(node, Project):
            return self.gc(node.child, complete)
        if isinstance(node, Dedup):
            psi = self.gc(node.child, complete)
            names = output_schema(node, self.schemas).names
            self.prove("dedup: all attributes equal", self.premise(psi, node.child), self.eq_all(names))
            return {a: "=" for a in names}
        if isinstance(node, (Cross, Join)):
            keep = complete and isinstance(node, Cross)
            psi = dict(self.gc(node.left, keep))
            psi.update(self.gc(node.right, keep))
            if isinstance(node, Join):
                # the instance-side pair joins; the matched pair must join as well
                prem = L.land(self.premise(psi, node.left), self.premise(psi, node.right),
                              self.fb.attr_cmp("=", node.left_attr, node.right_attr, self.kinds))
                self.prove(f"join {node.left_attr} = {node.right_attr}: join attributes equal",
                           prem, self.eq_all([node.left_attr, node.right_attr]))
            return psi
        if isinstance(node, Union):
            pl, pr = self.gc(node.left, complete), self.gc(node.right, complete)
            psi = {a: r for a, r in pl.items() if r is not None and pr.get(a) == r}
            for a in output_schema(node, self.schemas).names:
                if a in psi:
                    continue
                rl = pl.get(a) or self.derive(pl, node.left, a)
                rr = pr.get(a) or self.derive(pr, node.right, a)
                if rl is not None and rl == rr:
                    psi[a] = rl
            return psi
        if isinstance(node, TopK):
            psi = self.gc(node.child, False)
            if not complete:
                self.obligations.append(Obligation(
                    "topk: rows it returns may be dropped by an enclosing operator", L.TRUE, L.FALSE,
                    L.Verdict("Unknown", reason="top-k below a selection, join, top-k or min/max")))
            names = output_schema(node.child, self.schemas).names
            self.prove("topk: all input attributes equal", self.premise(psi, node.child),
                       self.eq_all(names))
            self.topk.append(node.count)
            return psi
        if isinstance(node, Aggregate):
            return self.aggregate(node, complete)
        raise TypeError(node)

    def aggregate(self, node, complete=True):
        psi = dict(self.gc(node.child, complete and node.func in ("count", "sum", "avg")))
        child = node.child
        prem = self.premise(psi, child)
        if node.group_by:
            self.prove("aggregate: group-by attributes equal", prem, self.eq_all(node.group_by))
        if node.func in ("min", "max"):
            # capture keeps one extreme row; no other row may overtake it
            op = "<=" if node.func == "max" else ">="
            self.prove(f"{node.func}: the captured extreme cannot be overtaken", prem,
                       self.fb.attr_cmp(op, node.arg, L.prime_name(node.arg), self.kinds))
        rel = self.aggregate_relation(node, psi, prem)
        psi[node.out] = rel
        return psi

    def aggregate_relation(self, node, psi, prem):
        child = node.child
        conds = self.fb.conds(child, self.kinds)
        f, a = node.func, node.arg
        a_eq = a is None or L.is_valid(prem, self.eq_all([a]), self.universe).valid

        def implied_group_attr(x):
            if x in node.group_by:
                return True
            return any(L.is_valid(conds, self.fb.attr_cmp("=", x, g, self.kinds), self.universe).valid
                       for g in node.group_by if self.kinds.get(g) == self.kinds.get(x)
                       or "str" not in (self.kinds.get(g), self.kinds.get(x)))

        if all(implied_group_attr(x) for x in self.x_in(child)):   # case (i)
            if f == "count" or a_eq:
                return "="
            return None
        if f == "count":                                             # case (ii)
            return "<="
        nonneg = L.is_valid(conds, L.cmp(">=", a, 0), self.universe).valid
        nonpos = L.is_valid(conds, L.cmp("<=", a, 0), self.universe).valid
        if f in ("sum", "max") and nonneg:
            if L.is_valid(prem, L.cmp("<=", a, L.prime_name(a)), self.universe).valid:
                return "<="
        if f in ("sum", "min") and nonpos:                           # case (iii)
            if L.is_valid(prem, L.cmp(">=", a, L.prime_name(a)), self.universe).valid:
                return ">="
        return None                                                  # case (iv)


def check_safe(plan, X, stats) -> SafetyReport:
    """Attribute-safety verdict for ``X`` (iterable of ``(relation, attribute)``)."""
    X = set(X)
    rels = set(scanned(plan))
    for rel, a in X:
        if rel not in rels:
            raise SchemaError(f"{rel}.{a}: relation {rel} is not scanned by the plan")
        if a not in stats.schemas[rel].kinds:
            raise SchemaError(f"{rel}.{a}: unknown attribute")
    output_schema(plan, stats.schemas)
    try:
        check_hygiene(plan, stats.schemas)
        reject_nulls(plan, stats)
    except SchemaError as e:
        return SafetyReport("Unknown", notes=[f"not analysed: {e}"])
    g = generalize(plan)
    ch = _Checker(g, X, stats)
    try:
        psi = ch.gc(g)
    except Opaque as e:
        return SafetyReport("Unknown", ch.obligations, notes=[f"not analysed: {e}"])
    ok = all(o.verdict.valid for o in ch.obligations)
    return SafetyReport("Safe" if ok else "Unknown", ch.obligations, psi, topk_min_rows=ch.topk)


def pred(plan, stats):
    fb = FormulaBuilder(stats.schemas, stats)
    return fb.pred(plan)


def expr(plan, schemas):
    fb = FormulaBuilder(schemas)
    return fb.expr(plan)
