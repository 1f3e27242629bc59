"""Recursive-descent parser for the textual algebra.

Grammar (EBNF)::

    plan   ::= 'scan' '(' NAME ')'
             | 'select' '(' cond ',' plan ')'
             | 'project' '(' '[' item {',' item} ']' ',' plan ')'
             | 'dedup' '(' plan ')'
             | 'cross' '(' plan ',' plan ')'
             | 'join' '(' NAME '=' NAME ',' plan ',' plan ')'
             | 'union' '(' plan ',' plan ')'
             | 'agg' '(' '[' [NAME {',' NAME}] ']' ',' FUNC '(' (NAME | '*') ')' 'as' NAME ',' plan ')'
             | 'topk' '(' keys ',' INT ',' plan ')'
    item   ::= expr 'as' NAME
    keys   ::= key | '[' key {',' key} ']'
    key    ::= NAME ['asc' | 'desc']
    cond   ::= conj {'OR' conj}
    conj   ::= neg {'AND' neg}
    neg    ::= 'NOT' neg | 'true' | 'false' | '(' cond ')' | expr CMP expr
    expr   ::= term {('+' | '-') term}
    term   ::= factor {'*' factor}
    factor ::= NUMBER | STRING | PARAM | NAME | '(' expr ')' | '-' factor

Keywords are case-insensitive.  ``CMP`` is one of ``= <> != < <= > >=``.
"""
from __future__ import annotations

import re
from fractions import Fraction

from .errors import ParseError
from .expr import (
    And, Attr, BinOp, BoolConst, Cmp, Const, Neg, Not, Or, Param,
)
from .plan import (
    AGG_FUNCS, Aggregate, Cross, Dedup, Join, Project, Scan, Select, TopK, Union,
    output_schema,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<str>'(?:[^']|'')*')
  | (?P<param>\$\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|!=|[=<>()\[\],+\-*])
    """,
    re.VERBOSE,
)


def tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


_CMP = {"=", "<>", "!=", "<", "<=", ">", ">="}
_KEYWORDS = {"and", "or", "not", "true", "false", "as"}


class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg):
        kind, val, pos = self.tok
        found = "end of input" if kind == "eof" else repr(val)
        raise ParseError(f"{msg}, found {found}", pos)

    def accept(self, value):
        if self.tok[0] in ("op", "name") and self.tok[1].lower() == value:
            self.i += 1
            return True
        return False

    def expect(self, value):
        if not self.accept(value):
            self.error(f"expected {value!r}")

    def name(self, what="name"):
        kind, val, _ = self.tok
        if kind != "name" or val.lower() in _KEYWORDS:
            self.error(f"expected {what}")
        self.i += 1
        return val

    def integer(self):
        kind, val, _ = self.tok
        if kind != "num" or "." in val:
            self.error("expected an integer")
        self.i += 1
        return int(val)

    # ---------------------------------------------------------------- plans
    def plan(self):
        kind, val, _ = self.tok
        if kind != "name":
            self.error("expected an operator")
        op = val.lower()
        handler = getattr(self, "_p_" + op, None)
        if handler is None:
            self.error("expected an operator")
        self.i += 1
        self.expect("(")
        node = handler()
        self.expect(")")
        return node

    def _p_scan(self):
        return Scan(self.name("relation name"))

    def _p_select(self):
        c = self.cond()
        self.expect(",")
        return Select(c, self.plan())

    def _p_project(self):
        self.expect("[")
        items = []
        while True:
            e = self.expr()
            self.expect("as")
            items.append((e, self.name("output name")))
            if not self.accept(","):
                break
        self.expect("]")
        self.expect(",")
        return Project(tuple(items), self.plan())

    def _p_dedup(self):
        return Dedup(self.plan())

    def _p_cross(self):
        l = self.plan()
        self.expect(",")
        return Cross(l, self.plan())

    def _p_union(self):
        l = self.plan()
        self.expect(",")
        return Union(l, self.plan())

    def _p_join(self):
        a = self.name("join attribute")
        self.expect("=")
        b = self.name("join attribute")
        self.expect(",")
        l = self.plan()
        self.expect(",")
        return Join(a, b, l, self.plan())

    def _p_agg(self):
        self.expect("[")
        groups = []
        if not self.accept("]"):
            while True:
                groups.append(self.name("group-by attribute"))
                if not self.accept(","):
                    break
            self.expect("]")
        self.expect(",")
        func = self.name("aggregate function").lower()
        if func not in AGG_FUNCS:
            self.i -= 1
            self.error("expected an aggregate function")
        self.expect("(")
        arg = None if self.accept("*") else self.name("attribute")
        self.expect(")")
        self.expect("as")
        out = self.name("output name")
        self.expect(",")
        return Aggregate(tuple(groups), func, arg, out, self.plan())

    def _key(self):
        a = self.name("order attribute")
        if self.accept("desc"):
            return (a, True)
        self.accept("asc")
        return (a, False)

    def _p_topk(self):
        if self.accept("["):
            keys = [self._key()]
            while self.accept(","):
                keys.append(self._key())
            self.expect("]")
        else:
            keys = [self._key()]
        self.expect(",")
        c = self.integer()
        self.expect(",")
        return TopK(tuple(keys), c, self.plan())

    # ----------------------------------------------------------- conditions
    def cond(self):
        items = [self.conj()]
        while self.accept("or"):
            items.append(self.conj())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conj(self):
        items = [self.neg()]
        while self.accept("and"):
            items.append(self.neg())
        return items[0] if len(items) == 1 else And(tuple(items))

    def neg(self):
        if self.accept("not"):
            return Not(self.neg())
        if self.accept("true"):
            return BoolConst(True)
        if self.accept("false"):
            return BoolConst(False)
        if self.tok[1] == "(":
            save = self.i
            try:
                self.i += 1
                c = self.cond()
                self.expect(")")
                if self.tok[0] == "op" and self.tok[1] in _CMP | {"+", "-", "*"}:
                    raise ParseError("parenthesised expression", self.tok[2])
                return c
            except ParseError:
                self.i = save
        return self.comparison()

    def comparison(self):
        l = self.expr()
        kind, val, _ = self.tok
        if kind != "op" or val not in _CMP:
            self.error("expected a comparison operator")
        self.i += 1
        r = self.expr()
        return Cmp("<>" if val == "!=" else val, l, r)

    # ---------------------------------------------------------- expressions
    def expr(self):
        e = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.tok[1]
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.accept("*"):
            e = BinOp("*", e, self.factor())
        return e

    def factor(self):
        kind, val, _ = self.tok
        if kind == "num":
            self.i += 1
            return Const(Fraction(val) if "." in val else int(val))
        if kind == "str":
            self.i += 1
            return Const(val[1:-1].replace("''", "'"))
        if kind == "param":
            self.i += 1
            idx = int(val[1:])
            if idx < 1:
                raise ParseError("parameters are numbered from $1", self.toks[self.i - 1][2])
            return Param(idx)
        if self.accept("-"):
            inner = self.factor()
            if isinstance(inner, Const) and not isinstance(inner.value, str):
                return Const(-inner.value)
            return Neg(inner)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name" and val.lower() not in _KEYWORDS:
            self.i += 1
            return Attr(val)
        self.error("expected an expression")


def parse_query(text: str, schemas: dict | None = None):
    """Parse ``text`` into a plan; validate against ``schemas`` when given."""
    p = _Parser(text)
    plan = p.plan()
    if p.tok[0] != "eof":
        p.error("unexpected trailing input")
    if schemas is not None:
        output_schema(plan, schemas)
    return plan


def parse_condition(text: str):
    p = _Parser(text)
    c = p.cond()
    if p.tok[0] != "eof":
        p.error("unexpected trailing input")
    return c
