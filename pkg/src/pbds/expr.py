"""Scalar expressions and row conditions used inside query plans.

Values are ``int``, ``Fraction``, ``str`` or ``None``.  Arithmetic is exact and
results with denominator 1 are folded back to ``int``.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import PlanTypeError, UnboundParameterError


def norm(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v.numerator)
    return v


def is_num(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def kind_of_value(v) -> str:
    if isinstance(v, str):
        return "str"
    if isinstance(v, bool):
        raise PlanTypeError("booleans are not values")
    if isinstance(v, int):
        return "int"
    if isinstance(v, Fraction):
        return "int" if v.denominator == 1 else "rat"
    raise PlanTypeError(f"unsupported value {v!r}")


def render_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    if isinstance(v, Fraction):
        v = norm(v)
        if isinstance(v, Fraction):
            return f"({v.numerator}/{v.denominator})"
    return str(v)


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Attr:
    name: str


@dataclass(frozen=True)
class Const:
    value: object


@dataclass(frozen=True)
class Param:
    index: int


@dataclass(frozen=True)
class BinOp:
    op: str  # '+', '-', '*'
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    operand: object


# ----------------------------------------------------------------- conditions

@dataclass(frozen=True)
class Cmp:
    op: str  # '=', '<>', '<', '<=', '>', '>='
    left: object
    right: object


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Not:
    item: object


@dataclass(frozen=True)
class BoolConst:
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True, eq=False)
class Member:
    """Opaque membership test ``test(attr)``; used for binary-search skipping."""

    attr: str
    test: Callable
    label: str


CMP_OPS = {
    "=": operator.eq,
    "<>": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}

FLIP = {"=": "=", "<>": "<>", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


def conj(*items):
    flat = []
    for it in items:
        if it == TRUE:
            continue
        if it == FALSE:
            return FALSE
        if isinstance(it, And):
            flat.extend(it.items)
        else:
            flat.append(it)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*items):
    flat = []
    for it in items:
        if it == FALSE:
            continue
        if it == TRUE:
            return TRUE
        if isinstance(it, Or):
            flat.extend(it.items)
        else:
            flat.append(it)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


# ------------------------------------------------------------------ traversal

def expr_attrs(e) -> set:
    if isinstance(e, Attr):
        return {e.name}
    if isinstance(e, BinOp):
        return expr_attrs(e.left) | expr_attrs(e.right)
    if isinstance(e, Neg):
        return expr_attrs(e.operand)
    return set()


def cond_attrs(c) -> set:
    if isinstance(c, Cmp):
        return expr_attrs(c.left) | expr_attrs(c.right)
    if isinstance(c, (And, Or)):
        out = set()
        for it in c.items:
            out |= cond_attrs(it)
        return out
    if isinstance(c, Not):
        return cond_attrs(c.item)
    if isinstance(c, Member):
        return {c.attr}
    return set()


def expr_params(e) -> set:
    if isinstance(e, Param):
        return {e.index}
    if isinstance(e, BinOp):
        return expr_params(e.left) | expr_params(e.right)
    if isinstance(e, Neg):
        return expr_params(e.operand)
    return set()


def cond_params(c) -> set:
    if isinstance(c, Cmp):
        return expr_params(c.left) | expr_params(c.right)
    if isinstance(c, (And, Or)):
        out = set()
        for it in c.items:
            out |= cond_params(it)
        return out
    if isinstance(c, Not):
        return cond_params(c.item)
    return set()


def subst_expr(e, binding):
    """Replace ``Param`` nodes using ``binding`` (1-based index -> value)."""
    if isinstance(e, Param):
        if e.index not in binding:
            raise UnboundParameterError(f"parameter ${e.index} is unbound")
        return Const(binding[e.index])
    if isinstance(e, BinOp):
        return BinOp(e.op, subst_expr(e.left, binding), subst_expr(e.right, binding))
    if isinstance(e, Neg):
        return Neg(subst_expr(e.operand, binding))
    return e


def subst_cond(c, binding):
    if isinstance(c, Cmp):
        return Cmp(c.op, subst_expr(c.left, binding), subst_expr(c.right, binding))
    if isinstance(c, And):
        return And(tuple(subst_cond(i, binding) for i in c.items))
    if isinstance(c, Or):
        return Or(tuple(subst_cond(i, binding) for i in c.items))
    if isinstance(c, Not):
        return Not(subst_cond(c.item, binding))
    return c


# ------------------------------------------------------------------ rendering

_PREC = {"+": 1, "-": 1, "*": 2}


def expr_to_text(e, prec=0) -> str:
    if isinstance(e, Attr):
        return e.name
    if isinstance(e, Const):
        return render_value(e.value)
    if isinstance(e, Param):
        return f"${e.index}"
    if isinstance(e, Neg):
        return "-" + expr_to_text(e.operand, 3)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        right_prec = p + 1 if e.op == "-" else p
        s = f"{expr_to_text(e.left, p)} {e.op} {expr_to_text(e.right, right_prec)}"
        return f"({s})" if p < prec else s
    raise TypeError(f"not an expression: {e!r}")


def cond_to_text(c, prec=0) -> str:
    if isinstance(c, BoolConst):
        return "true" if c.value else "false"
    if isinstance(c, Cmp):
        return f"{expr_to_text(c.left)} {c.op} {expr_to_text(c.right)}"
    if isinstance(c, And):
        s = " AND ".join(cond_to_text(i, 2) for i in c.items)
        return f"({s})" if prec > 2 else s
    if isinstance(c, Or):
        s = " OR ".join(cond_to_text(i, 1) for i in c.items)
        return f"({s})" if prec > 1 else s
    if isinstance(c, Not):
        return "NOT " + cond_to_text(c.item, 3)
    if isinstance(c, Member):
        return c.label
    raise TypeError(f"not a condition: {c!r}")


# ------------------------------------------------------------------ compiling

def _arith(op, a, b):
    if a is None or b is None:
        return None
    if isinstance(a, str) or isinstance(b, str):
        raise PlanTypeError("arithmetic over strings")
    if op == "+":
        return norm(a + b)
    if op == "-":
        return norm(a - b)
    return norm(Fraction(a) * b) if isinstance(a, Fraction) or isinstance(b, Fraction) else a * b


def compile_expr(e, index: dict) -> Callable:
    """Return ``f(row_tuple) -> value``; ``index`` maps attribute name to position."""
    if isinstance(e, Attr):
        i = index[e.name]
        return operator.itemgetter(i)
    if isinstance(e, Const):
        v = e.value
        return lambda row: v
    if isinstance(e, Param):
        raise UnboundParameterError(f"parameter ${e.index} is unbound")
    if isinstance(e, Neg):
        f = compile_expr(e.operand, index)
        return lambda row: _arith("-", 0, f(row))
    if isinstance(e, BinOp):
        lf = compile_expr(e.left, index)
        rf = compile_expr(e.right, index)
        op = e.op
        return lambda row: _arith(op, lf(row), rf(row))
    raise TypeError(f"not an expression: {e!r}")


def compare(op, a, b) -> bool:
    if a is None or b is None:
        return False
    if isinstance(a, str) != isinstance(b, str):
        raise PlanTypeError(f"cannot compare {a!r} with {b!r}")
    return CMP_OPS[op](a, b)


def compile_cond(c, index: dict) -> Callable:
    if isinstance(c, BoolConst):
        v = c.value
        return lambda row: v
    if isinstance(c, Cmp):
        op = CMP_OPS[c.op]
        # fast path: attribute vs constant
        if isinstance(c.left, Attr) and isinstance(c.right, Const) and c.right.value is not None:
            i = index[c.left.name]
            k = c.right.value
            ks = isinstance(k, str)

            def f(row, i=i, k=k):
                v = row[i]
                if v is None:
                    return False
                if isinstance(v, str) != ks:
                    raise PlanTypeError(f"cannot compare {v!r} with {k!r}")
                return op(v, k)
            return f
        lf = compile_expr(c.left, index)
        rf = compile_expr(c.right, index)
        name = c.op
        return lambda row: compare(name, lf(row), rf(row))
    if isinstance(c, And):
        fs = [compile_cond(i, index) for i in c.items]
        return lambda row: all(f(row) for f in fs)
    if isinstance(c, Or):
        fs = [compile_cond(i, index) for i in c.items]
        return lambda row: any(f(row) for f in fs)
    if isinstance(c, Not):
        f = compile_cond(c.item, index)
        return lambda row: not f(row)
    if isinstance(c, Member):
        i = index[c.attr]
        t = c.test
        return lambda row: row[i] is not None and t(row[i])
    raise TypeError(f"not a condition: {c!r}")
