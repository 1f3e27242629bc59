"""Query plan nodes, schema inference and textual rendering."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import PlanTypeError, SchemaError
from .expr import (
    Attr, BinOp, BoolConst, Cmp, Const, Member, Neg, Not, And, Or, Param,
    cond_attrs, cond_params, cond_to_text, expr_params, expr_to_text, kind_of_value,
    subst_cond, subst_expr,
)
from .relation import Schema

AGG_FUNCS = ("count", "sum", "avg", "min", "max")


@dataclass(frozen=True)
class Scan:
    relation: str


@dataclass(frozen=True)
class Select:
    cond: object
    child: object


@dataclass(frozen=True)
class Project:
    items: tuple  # ((expr, name), ...)
    child: object


@dataclass(frozen=True)
class Dedup:
    child: object


@dataclass(frozen=True)
class Cross:
    left: object
    right: object


@dataclass(frozen=True)
class Join:
    left_attr: str
    right_attr: str
    left: object
    right: object


@dataclass(frozen=True)
class Union:
    left: object
    right: object


@dataclass(frozen=True)
class Aggregate:
    group_by: tuple
    func: str
    arg: object  # attribute name, or None for count(*)
    out: str
    child: object


@dataclass(frozen=True)
class TopK:
    keys: tuple  # ((attr, descending), ...)
    count: int
    child: object


def children(p) -> tuple:
    if isinstance(p, Scan):
        return ()
    if isinstance(p, (Cross, Join, Union)):
        return (p.left, p.right)
    return (p.child,)


def with_children(p, kids):
    if isinstance(p, Scan):
        return p
    if isinstance(p, Select):
        return Select(p.cond, kids[0])
    if isinstance(p, Project):
        return Project(p.items, kids[0])
    if isinstance(p, Dedup):
        return Dedup(kids[0])
    if isinstance(p, Cross):
        return Cross(kids[0], kids[1])
    if isinstance(p, Join):
        return Join(p.left_attr, p.right_attr, kids[0], kids[1])
    if isinstance(p, Union):
        return Union(kids[0], kids[1])
    if isinstance(p, Aggregate):
        return Aggregate(p.group_by, p.func, p.arg, p.out, kids[0])
    if isinstance(p, TopK):
        return TopK(p.keys, p.count, kids[0])
    raise TypeError(f"not a plan node: {p!r}")


def union_variants(p) -> list:
    """Union-free plans obtained by replacing every union with one of its inputs."""
    if isinstance(p, Union):
        return union_variants(p.left) + union_variants(p.right)
    out = [()]
    for c in children(p):
        out = [k + (v,) for k in out for v in union_variants(c)]
    return [with_children(p, k) for k in out]


def walk(p):
    """Pre-order traversal."""
    yield p
    for c in children(p):
        yield from walk(c)


def scanned(p) -> list:
    return [n.relation for n in walk(p) if isinstance(n, Scan)]


def plan_params(p) -> set:
    out = set()
    for n in walk(p):
        if isinstance(n, Select):
            out |= cond_params(n.cond)
        elif isinstance(n, Project):
            for e, _ in n.items:
                out |= expr_params(e)
    return out


def bind(p, binding: dict):
    """Substitute parameters; ``binding`` maps 1-based index to a value."""
    if isinstance(p, Select):
        return Select(subst_cond(p.cond, binding), bind(p.child, binding))
    if isinstance(p, Project):
        return Project(tuple((subst_expr(e, binding), n) for e, n in p.items), bind(p.child, binding))
    return with_children(p, [bind(c, binding) for c in children(p)])


# ------------------------------------------------------------ schema checking

def _expr_kind(e, kinds: dict, param_kinds: dict) -> str:
    if isinstance(e, Attr):
        if e.name not in kinds:
            raise SchemaError(f"unknown attribute {e.name!r}")
        return kinds[e.name]
    if isinstance(e, Const):
        if e.value is None:
            return "null"
        return kind_of_value(e.value)
    if isinstance(e, Param):
        return param_kinds.get(e.index, "param")
    if isinstance(e, Neg):
        k = _expr_kind(e.operand, kinds, param_kinds)
        if k == "str":
            raise PlanTypeError("negation of a string")
        return k
    if isinstance(e, BinOp):
        lk = _expr_kind(e.left, kinds, param_kinds)
        rk = _expr_kind(e.right, kinds, param_kinds)
        if "str" in (lk, rk):
            raise PlanTypeError(f"arithmetic over strings in {expr_to_text(e)}")
        if e.op == "*" and not (_is_constant(e.left) or _is_constant(e.right)):
            raise PlanTypeError(f"non-linear product in {expr_to_text(e)}")
        if "param" in (lk, rk):
            return "rat"
        return "int" if lk == rk == "int" else "rat"
    raise TypeError(f"not an expression: {e!r}")


def _is_constant(e) -> bool:
    if isinstance(e, (Const, Param)):
        return True
    if isinstance(e, Neg):
        return _is_constant(e.operand)
    if isinstance(e, BinOp):
        return _is_constant(e.left) and _is_constant(e.right)
    return False


def _check_cond(c, kinds, param_kinds):
    if isinstance(c, BoolConst):
        return
    if isinstance(c, Cmp):
        lk = _expr_kind(c.left, kinds, param_kinds)
        rk = _expr_kind(c.right, kinds, param_kinds)
        known = {lk, rk} - {"param", "null"}
        if "str" in known and len(known) > 1:
            raise PlanTypeError(f"comparison mixes strings and numbers: {cond_to_text(c)}")
        return
    if isinstance(c, (And, Or)):
        for i in c.items:
            _check_cond(i, kinds, param_kinds)
        return
    if isinstance(c, Not):
        _check_cond(c.item, kinds, param_kinds)
        return
    if isinstance(c, Member):
        if c.attr not in kinds:
            raise SchemaError(f"unknown attribute {c.attr!r}")
        return
    raise TypeError(f"not a condition: {c!r}")


def output_schema(p, schemas: dict, _seen=None) -> Schema:
    """Infer and validate the output schema of ``p``.

    ``schemas`` maps relation name to :class:`Schema`.  Raises on unknown
    relations or attributes, type errors, union mismatches, duplicate names
    and repeated relation access.
    """
    top = _seen is None
    seen = set() if top else _seen
    if isinstance(p, Scan):
        if p.relation not in schemas:
            raise SchemaError(f"unknown relation {p.relation!r}")
        if p.relation in seen:
            raise SchemaError(f"relation {p.relation!r} is accessed more than once")
        seen.add(p.relation)
        return schemas[p.relation]
    if isinstance(p, Select):
        s = output_schema(p.child, schemas, seen)
        _check_cond(p.cond, s.kinds, {})
        return s
    if isinstance(p, Project):
        s = output_schema(p.child, schemas, seen)
        attrs = []
        for e, name in p.items:
            k = _expr_kind(e, s.kinds, {})
            if k in ("param", "null"):
                k = "rat"
            attrs.append((name, k))
        return Schema("result", tuple(attrs))
    if isinstance(p, Dedup):
        return output_schema(p.child, schemas, seen)
    if isinstance(p, (Cross, Join)):
        l = output_schema(p.left, schemas, seen)
        r = output_schema(p.right, schemas, seen)
        clash = set(l.names) & set(r.names)
        if clash:
            raise SchemaError(f"attribute names clash in product: {sorted(clash)}")
        if isinstance(p, Join):
            if p.left_attr not in l.kinds:
                raise SchemaError(f"unknown join attribute {p.left_attr!r}")
            if p.right_attr not in r.kinds:
                raise SchemaError(f"unknown join attribute {p.right_attr!r}")
            if (l.kinds[p.left_attr] == "str") != (r.kinds[p.right_attr] == "str"):
                raise PlanTypeError("join compares strings with numbers")
        return Schema("result", l.attrs + r.attrs)
    if isinstance(p, Union):
        l = output_schema(p.left, schemas, seen)
        r = output_schema(p.right, schemas, seen)
        if l.names != r.names or any((a == "str") != (b == "str") for (_, a), (_, b) in zip(l.attrs, r.attrs)):
            raise SchemaError("union inputs must have identical schemas")
        attrs = tuple((n, a if a == b else "rat") for (n, a), (_, b) in zip(l.attrs, r.attrs))
        return Schema("result", attrs)
    if isinstance(p, Aggregate):
        s = output_schema(p.child, schemas, seen)
        kinds = s.kinds
        for g in p.group_by:
            if g not in kinds:
                raise SchemaError(f"unknown group-by attribute {g!r}")
        if p.func not in AGG_FUNCS:
            raise SchemaError(f"unknown aggregate function {p.func!r}")
        if p.arg is None:
            if p.func != "count":
                raise SchemaError(f"{p.func}(*) is not allowed")
            out_kind = "int"
        else:
            if p.arg not in kinds:
                raise SchemaError(f"unknown attribute {p.arg!r}")
            ak = kinds[p.arg]
            if p.func == "count":
                out_kind = "int"
            elif ak == "str":
                raise PlanTypeError(f"{p.func} over non-numeric attribute {p.arg!r}")
            elif p.func == "avg":
                out_kind = "rat"
            else:
                out_kind = ak
        if p.out in p.group_by:
            raise SchemaError(f"aggregate output {p.out!r} clashes with a group-by attribute")
        return Schema("result", tuple((g, kinds[g]) for g in p.group_by) + ((p.out, out_kind),))
    if isinstance(p, TopK):
        s = output_schema(p.child, schemas, seen)
        for a, _ in p.keys:
            if a not in s.kinds:
                raise SchemaError(f"unknown order attribute {a!r}")
        if p.count < 0:
            raise SchemaError("top-k count must be non-negative")
        return s
    raise TypeError(f"not a plan node: {p!r}")


def all_kinds(p, schemas: dict) -> dict:
    """Kinds of every attribute name that appears anywhere in the plan."""
    out = {}
    for n in walk(p):
        for a, k in output_schema(n, schemas, set()).attrs:
            if a in out and out[a] != k and "str" in (out[a], k):
                raise SchemaError(f"attribute {a!r} used with two kinds")
            out[a] = "rat" if a in out and out[a] != k else k
    return out


# ------------------------------------------------------------------ rendering

def to_text(p) -> str:
    if isinstance(p, Scan):
        return f"scan({p.relation})"
    if isinstance(p, Select):
        return f"select({cond_to_text(p.cond)}, {to_text(p.child)})"
    if isinstance(p, Project):
        items = ", ".join(f"{expr_to_text(e)} as {n}" for e, n in p.items)
        return f"project([{items}], {to_text(p.child)})"
    if isinstance(p, Dedup):
        return f"dedup({to_text(p.child)})"
    if isinstance(p, Cross):
        return f"cross({to_text(p.left)}, {to_text(p.right)})"
    if isinstance(p, Join):
        return f"join({p.left_attr} = {p.right_attr}, {to_text(p.left)}, {to_text(p.right)})"
    if isinstance(p, Union):
        return f"union({to_text(p.left)}, {to_text(p.right)})"
    if isinstance(p, Aggregate):
        arg = "*" if p.arg is None else p.arg
        return f"agg([{', '.join(p.group_by)}], {p.func}({arg}) as {p.out}, {to_text(p.child)})"
    if isinstance(p, TopK):
        keys = ", ".join(f"{a} {'desc' if d else 'asc'}" for a, d in p.keys)
        if len(p.keys) != 1:
            keys = f"[{keys}]"
        return f"topk({keys}, {p.count}, {to_text(p.child)})"
    raise TypeError(f"not a plan node: {p!r}")


def referenced_attrs(p) -> list:
    """Attributes mentioned in selection conditions, in first-use order (bottom-up)."""
    out = []
    nodes = list(walk(p))
    for n in reversed(nodes):
        if isinstance(n, Select):
            for a in sorted(cond_attrs(n.cond)):
                if a not in out:
                    out.append(a)
    return out
