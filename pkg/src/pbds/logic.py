"""Formulas over linear comparison atoms and a sound implication checker.

``is_valid(premise, conclusion)`` negates the implication, converts it to DNF
and tries to refute every conjunct:

* linear equalities are eliminated by exact substitution,
* single-variable atoms become bounds and two-variable atoms of shape
  ``x - y <= c`` become edges of a difference-constraint graph, which is
  checked for negative cycles (strictness is tracked as an infinitesimal),
* string atoms are handled with equality classes, bounds and an order graph.

Atoms of any other shape are kept only for witness checking.  A conjunct that
cannot be refuted yields ``NotValid`` only when a concrete assignment is found
and verified by substitution; otherwise the answer is ``Unknown``.  Reasoning
is over the rationals, which is sound for integer-valued variables as well.
"""
from __future__ import annotations

import itertools
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import LogicTypeError

DNF_LIMIT = 10_000

# ------------------------------------------------------------------- formulas


@dataclass(frozen=True)
class Lin:
    """``sum(c * v for v, c in coeffs) + const``."""

    coeffs: tuple = ()
    const: Fraction = Fraction(0)

    @staticmethod
    def of(d: dict, const=0) -> "Lin":
        return Lin(tuple(sorted((v, Fraction(c)) for v, c in d.items() if c != 0)), Fraction(const))

    def as_dict(self) -> dict:
        return dict(self.coeffs)

    @property
    def vars(self) -> tuple:
        return tuple(v for v, _ in self.coeffs)

    def __add__(self, other):
        other = lin(other)
        d = self.as_dict()
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return Lin.of(d, self.const + other.const)

    def __sub__(self, other):
        return self + lin(other).scale(-1)

    def scale(self, k) -> "Lin":
        k = Fraction(k)
        return Lin.of({v: c * k for v, c in self.coeffs}, self.const * k)

    def value(self, env) -> Fraction:
        return sum((c * env[v] for v, c in self.coeffs), self.const)


def var(name: str) -> Lin:
    return Lin(((name, Fraction(1)),), Fraction(0))


def lin(x) -> Lin:
    if isinstance(x, Lin):
        return x
    if isinstance(x, str):
        return var(x)
    return Lin((), Fraction(x))


@dataclass(frozen=True)
class SVar:
    name: str


@dataclass(frozen=True)
class Atom:
    """Numeric atom ``lin op 0``."""

    op: str
    lin: Lin


@dataclass(frozen=True)
class SAtom:
    """String atom ``left op right``; sides are :class:`SVar` or ``str``."""

    op: str
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
class _Const:
    value: bool


TRUE = _Const(True)
FALSE = _Const(False)

OPS = ("=", "<>", "<", "<=", ">", ">=")
NEG = {"=": "<>", "<>": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}
FLIP = {"=": "=", "<>": "<>", "<": ">", "<=": ">=", ">": "<", ">=": "<="}
_PY = {"=": operator.eq, "<>": operator.ne, "<": operator.lt, "<=": operator.le,
       ">": operator.gt, ">=": operator.ge}


def cmp(op: str, left, right):
    """Build ``left op right``.

    With an :class:`SVar` on either side the atom is a string atom and plain
    ``str`` values are string constants.  Otherwise both sides are numeric:
    ``Lin``, numbers, or variable names given as ``str``.
    """
    if op not in OPS:
        raise ValueError(f"unknown comparison {op!r}")
    if isinstance(left, SVar) or isinstance(right, SVar):
        return SAtom(op, left, right)
    return Atom(op, lin(left) - lin(right))


def land(*items):
    flat = []
    for it in items:
        if it == TRUE:
            continue
        if it == FALSE:
            return FALSE
        flat.extend(it.items if isinstance(it, And) else [it])
    if not flat:
        return TRUE
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def lor(*items):
    flat = []
    for it in items:
        if it == FALSE:
            continue
        if it == TRUE:
            return TRUE
        flat.extend(it.items if isinstance(it, Or) else [it])
    if not flat:
        return FALSE
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def lnot(f):
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    return Not(f)


def implies(a, b):
    return lor(lnot(a), b)


def conjuncts(f) -> list:
    if f == TRUE:
        return []
    return list(f.items) if isinstance(f, And) else [f]


def formula_vars(f) -> set:
    if isinstance(f, Atom):
        return set(f.lin.vars)
    if isinstance(f, SAtom):
        return {s.name for s in (f.left, f.right) if isinstance(s, SVar)}
    if isinstance(f, (And, Or)):
        out = set()
        for it in f.items:
            out |= formula_vars(it)
        return out
    if isinstance(f, Not):
        return formula_vars(f.item)
    return set()


def var_kinds(f, out=None) -> dict:
    """Kinds implied by usage: 'num' for numeric atoms, 'str' for string atoms."""
    out = {} if out is None else out

    def note(v, k):
        if out.get(v, k) != k:
            raise LogicTypeError(f"variable {v!r} used both as string and number")
        out[v] = k

    if isinstance(f, Atom):
        for v in f.lin.vars:
            note(v, "num")
    elif isinstance(f, SAtom):
        for s in (f.left, f.right):
            if isinstance(s, SVar):
                note(s.name, "str")
    elif isinstance(f, (And, Or)):
        for it in f.items:
            var_kinds(it, out)
    elif isinstance(f, Not):
        var_kinds(f.item, out)
    return out


def rename(f, fn):
    """Rename variables with ``fn(name) -> name``."""
    if isinstance(f, Atom):
        return Atom(f.op, Lin.of({fn(v): c for v, c in f.lin.coeffs}, f.lin.const))
    if isinstance(f, SAtom):
        side = lambda s: SVar(fn(s.name)) if isinstance(s, SVar) else s  # noqa: E731
        return SAtom(f.op, side(f.left), side(f.right))
    if isinstance(f, And):
        return And(tuple(rename(i, fn) for i in f.items))
    if isinstance(f, Or):
        return Or(tuple(rename(i, fn) for i in f.items))
    if isinstance(f, Not):
        return Not(rename(f.item, fn))
    return f


def prime_name(v: str) -> str:
    return v if v.startswith("$") else v + "'"


def prime(f):
    """Prime every attribute variable; parameters (``$k``) are shared."""
    return rename(f, prime_name)


def evaluate(f, env: dict) -> bool:
    if isinstance(f, _Const):
        return f.value
    if isinstance(f, Atom):
        return _PY[f.op](f.lin.value(env), 0)
    if isinstance(f, SAtom):
        l = env[f.left.name] if isinstance(f.left, SVar) else f.left
        r = env[f.right.name] if isinstance(f.right, SVar) else f.right
        return _PY[f.op](l, r)
    if isinstance(f, And):
        return all(evaluate(i, env) for i in f.items)
    if isinstance(f, Or):
        return any(evaluate(i, env) for i in f.items)
    if isinstance(f, Not):
        return not evaluate(f.item, env)
    raise TypeError(f"not a formula: {f!r}")


# ------------------------------------------------------------- s-expressions

def _num(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _lin_sexpr(l: Lin) -> str:
    terms = []
    for v, c in l.coeffs:
        terms.append(v if c == 1 else f"(* {_num(c)} {v})")
    if l.const or not terms:
        terms.append(_num(l.const))
    return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"


def to_sexpr(f) -> str:
    if isinstance(f, _Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f"({f.op} {_lin_sexpr(f.lin)} 0)"
    if isinstance(f, SAtom):
        side = lambda s: s.name if isinstance(s, SVar) else '"' + s.replace('"', '\\"') + '"'  # noqa: E731
        return f"({f.op} {side(f.left)} {side(f.right)})"
    if isinstance(f, And):
        return "(and " + " ".join(to_sexpr(i) for i in f.items) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(to_sexpr(i) for i in f.items) + ")"
    if isinstance(f, Not):
        return f"(not {to_sexpr(f.item)})"
    raise TypeError(f"not a formula: {f!r}")


# ------------------------------------------------------------------ verdicts

@dataclass(frozen=True)
class Verdict:
    status: str  # 'Valid' | 'NotValid' | 'Unknown'
    counterexample: dict = field(default=None, compare=False)
    reason: str = field(default="", compare=False)

    @property
    def valid(self) -> bool:
        return self.status == "Valid"

    def __str__(self):
        if self.status == "NotValid":
            cx = ", ".join(f"{k}={_show(v)}" for k, v in sorted(self.counterexample.items()))
            return f"NotValid({cx})"
        return self.status


def _show(v):
    if isinstance(v, str):
        return repr(v)
    if isinstance(v, Fraction):
        return _num(v)
    return str(v)


VALID = Verdict("Valid")


# ----------------------------------------------------------------------- NNF

def nnf(f, negate=False):
    if isinstance(f, _Const):
        return _Const(f.value != negate)
    if isinstance(f, Atom):
        return Atom(NEG[f.op], f.lin) if negate else f
    if isinstance(f, SAtom):
        return SAtom(NEG[f.op], f.left, f.right) if negate else f
    if isinstance(f, Not):
        return nnf(f.item, not negate)
    if isinstance(f, And):
        parts = [nnf(i, negate) for i in f.items]
        return lor(*parts) if negate else land(*parts)
    if isinstance(f, Or):
        parts = [nnf(i, negate) for i in f.items]
        return land(*parts) if negate else lor(*parts)
    raise TypeError(f"not a formula: {f!r}")


class _Blowup(Exception):
    pass


def dnf(f, limit=DNF_LIMIT) -> list:
    """List of conjuncts (tuples of literals) of an NNF formula."""
    if isinstance(f, _Const):
        return [()] if f.value else []
    if isinstance(f, Atom):
        if f.op == "<>":
            return [(Atom("<", f.lin),), (Atom(">", f.lin),)]
        return [(f,)]
    if isinstance(f, SAtom):
        return [(f,)]
    if isinstance(f, Or):
        out = []
        for it in f.items:
            out.extend(dnf(it, limit))
            if len(out) > limit:
                raise _Blowup()
        return out
    if isinstance(f, And):
        acc = [()]
        for it in f.items:
            part = dnf(it, limit)
            if len(acc) * len(part) > limit:
                # prune trivially false conjuncts before giving up
                acc = [c for c in acc if not _trivially_false(c)]
                part = [c for c in part if not _trivially_false(c)]
                if len(acc) * len(part) > limit:
                    raise _Blowup()
            acc = [a + b for a in acc for b in part]
            if not acc:
                return []
        return acc
    raise TypeError(f"not in NNF: {f!r}")


def _trivially_false(conj) -> bool:
    for a in conj:
        if isinstance(a, Atom) and not a.lin.coeffs and not _PY[a.op](a.lin.const, 0):
            return True
    return False


# ------------------------------------------------------------ numeric solver

_ZERO = "\x00zero"


def _apply(l: Lin, subst: dict) -> Lin:
    if not any(v in subst for v, _ in l.coeffs):
        return l
    out = Lin((), l.const)
    rest = {}
    for v, c in l.coeffs:
        if v in subst:
            out = out + subst[v].scale(c)
        else:
            rest[v] = rest.get(v, 0) + c
    return out + Lin.of(rest)


def _numeric(atoms):
    """Returns ('unsat',) or ('open', subst, order, diff_edges, others)."""
    eqs, ineqs = [], []
    for a in atoms:
        l, op = a.lin, a.op
        if op in (">", ">="):
            l, op = l.scale(-1), {">": "<", ">=": "<="}[op]
        (eqs if op == "=" else ineqs).append((l, op))

    subst, order = {}, []
    for l, _ in eqs:
        l = _apply(l, subst)
        if not l.coeffs:
            if l.const != 0:
                return ("unsat",)
            continue
        # solve for a variable, preferring unit coefficients
        v, c = next(((v, c) for v, c in l.coeffs if abs(c) == 1), l.coeffs[0])
        rest = Lin.of({w: d for w, d in l.coeffs if w != v}, l.const).scale(Fraction(-1) / c)
        for k in list(subst):
            subst[k] = _apply(subst[k], {v: rest})
        subst[v] = rest
        order.append(v)

    edges, others = [], []
    for l, op in ineqs:
        l = _apply(l, subst)
        strict = -1 if op == "<" else 0
        if not l.coeffs:
            if not _PY[op](l.const, 0):
                return ("unsat",)
            continue
        if len(l.coeffs) == 1:
            (v, c), = l.coeffs
            bound = -l.const / c
            if c > 0:    # v op bound  ->  v - 0 <= bound
                edges.append((v, _ZERO, bound, strict))
            else:        # v op' bound with flipped sense -> 0 - v <= -bound
                edges.append((_ZERO, v, -bound, strict))
            continue
        if len(l.coeffs) == 2:
            (x, a), (y, b) = l.coeffs
            if a == -b:
                k = -l.const / abs(a)
                if a > 0:
                    edges.append((x, y, k, strict))   # x - y op k
                else:
                    edges.append((y, x, k, strict))
                continue
        others.append((l, op))
    return ("open", subst, order, edges, others)


def _floyd(nodes, edges):
    """All-pairs shortest paths with weights (value, strict_count)."""
    n = len(nodes)
    idx = {v: i for i, v in enumerate(nodes)}
    INF = None
    d = [[INF] * n for _ in range(n)]
    for i in range(n):
        d[i][i] = (Fraction(0), 0)
    for u, v, w, s in edges:     # u - v <= w : edge v -> u
        i, j = idx[v], idx[u]
        cand = (w, s)
        if d[i][j] is None or cand < d[i][j]:
            d[i][j] = cand
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            if dik is None:
                continue
            di = d[i]
            for j in range(n):
                dkj = dk[j]
                if dkj is None:
                    continue
                cand = (dik[0] + dkj[0], dik[1] + dkj[1])
                if di[j] is None or cand < di[j]:
                    di[j] = cand
        if any(d[i][i] < (0, 0) for i in range(n)):
            return None
    return d


def _numeric_witnesses(nodes, d, subst, order, eps_list):
    n = len(nodes)
    # potential from a virtual source joined to every node with weight 0
    pot = []
    for j in range(n):
        best = (Fraction(0), 0)
        for i in range(n):
            if d[i][j] is not None and d[i][j] < best:
                best = d[i][j]
        pot.append(best)
    zi = nodes.index(_ZERO) if _ZERO in nodes else None
    for eps in eps_list:
        vals = {}
        for v, (w, s) in zip(nodes, pot):
            vals[v] = w + s * eps
        shift = vals[_ZERO] if zi is not None else 0
        env = {v: x - shift for v, x in vals.items() if v != _ZERO}
        yield env


# ------------------------------------------------------------- string solver

class _UF:
    def __init__(self):
        self.p = {}

    def find(self, x):
        self.p.setdefault(x, x)
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a, b):
        self.p[self.find(a)] = self.find(b)


def _strings(atoms):
    """Returns ('unsat',) or ('open', candidate_assignments)."""
    uf = _UF()
    norm = []
    for a in atoms:
        l, r, op = a.left, a.right, a.op
        if not isinstance(l, SVar) and isinstance(r, SVar):
            l, r, op = r, l, FLIP[op]
        if not isinstance(l, SVar):
            if not _PY[op](l, r):
                return ("unsat",)
            continue
        uf.find(l.name)
        if isinstance(r, SVar):
            uf.find(r.name)
            if op == "=":
                uf.union(l.name, r.name)
        norm.append((l, op, r))

    const, lo, hi, ne_c = {}, {}, {}, {}
    order_edges, ne_v = [], []

    def tighten_lo(c, v, strict):
        cur = lo.get(c)
        if cur is None or v > cur[0] or (v == cur[0] and strict and not cur[1]):
            lo[c] = (v, strict)
            return True
        return False

    def tighten_hi(c, v, strict):
        cur = hi.get(c)
        if cur is None or v < cur[0] or (v == cur[0] and strict and not cur[1]):
            hi[c] = (v, strict)
            return True
        return False

    for l, op, r in norm:
        c = uf.find(l.name)
        if isinstance(r, SVar):
            d = uf.find(r.name)
            if op == "=":
                continue
            if op == "<>":
                if c == d:
                    return ("unsat",)
                ne_v.append((c, d))
                continue
            if op in (">", ">="):
                c, d, op = d, c, FLIP[op]
            if c == d:
                if op == "<":
                    return ("unsat",)
                continue
            order_edges.append((c, d, op == "<"))
            continue
        if op == "=":
            if const.get(c, r) != r:
                return ("unsat",)
            const[c] = r
        elif op == "<>":
            ne_c.setdefault(c, set()).add(r)
        elif op in ("<", "<="):
            tighten_hi(c, r, op == "<")
        else:
            tighten_lo(c, r, op == ">")

    classes = sorted({uf.find(v) for v in uf.p})
    for c, v in const.items():
        tighten_lo(c, v, False)
        tighten_hi(c, v, False)
    # strict cycles in the order graph
    if order_edges:
        d = _floyd(classes, [(b, a, Fraction(0), -1 if s else 0) for a, b, s in order_edges])
        if d is None:
            return ("unsat",)
    for _ in range(len(classes) + 1):
        changed = False
        for a, b, s in order_edges:       # a < b or a <= b
            if a in lo and tighten_lo(b, lo[a][0], lo[a][1] or s):
                changed = True
            if b in hi and tighten_hi(a, hi[b][0], hi[b][1] or s):
                changed = True
        if not changed:
            break
    for c in classes:
        if c in lo and c in hi:
            (lv, ls), (hv, hs) = lo[c], hi[c]
            if lv > hv or (lv == hv and (ls or hs)):
                return ("unsat",)
            if lv == hv and lv in ne_c.get(c, ()):
                return ("unsat",)
    for a, b in ne_v:
        if a in const and b in const and const[a] == const[b]:
            return ("unsat",)
        if (a in lo and a in hi and b in lo and b in hi and lo[a] == hi[a] == lo[b] == hi[b]
                and not lo[a][1]):
            return ("unsat",)

    # witness candidate: satisfy bounds per class, then repair order edges
    val = {}
    for c in classes:
        val[c] = _pick_string(lo.get(c), hi.get(c), ne_c.get(c, set()))
    for _ in range(len(classes) + 1):
        changed = False
        for a, b, s in order_edges:
            if (s and not val[a] < val[b]) or (not s and not val[a] <= val[b]):
                val[b] = val[a] + "\x00" if s else val[a]
                changed = True
        if not changed:
            break
    env = {v: val[uf.find(v)] for v in uf.p}
    return ("open", env)


def _pick_string(lo, hi, avoid):
    cands = []
    if lo is not None:
        cands += [lo[0], lo[0] + "\x00", lo[0] + "\x00\x00"]
    if hi is not None:
        cands += [hi[0]]
        if hi[0]:
            cands += [hi[0][:-1]]
    cands += ["", "a", "m", "zzzz", "~~~~"]
    for s in cands:
        if lo is not None and (s < lo[0] or (s == lo[0] and lo[1])):
            continue
        if hi is not None and (s > hi[0] or (s == hi[0] and hi[1])):
            continue
        if s in avoid:
            continue
        return s
    return lo[0] if lo is not None else ""


# --------------------------------------------------------------- entry point

_EPS = (Fraction(1), Fraction(1, 2), Fraction(1, 10), Fraction(1, 1000), Fraction(1, 10**6))


def _solve_conjunct(conj, check, all_vars, kinds):
    num = [a for a in conj if isinstance(a, Atom)]
    strs = [a for a in conj if isinstance(a, SAtom)]
    s_res = _strings(strs)
    if s_res[0] == "unsat":
        return "unsat", None
    n_res = _numeric(num)
    if n_res[0] == "unsat":
        return "unsat", None
    _, subst, order, edges, others = n_res
    nodes = sorted({e[0] for e in edges} | {e[1] for e in edges})
    if nodes:
        d = _floyd(nodes, edges)
        if d is None:
            return "unsat", None
        envs = _numeric_witnesses(nodes, d, subst, order, _EPS)
    else:
        envs = iter([{}])
    str_env = s_res[1]
    for base in envs:
        env = {}
        for v in all_vars:
            if kinds.get(v) == "str":
                env[v] = str_env.get(v, "")
            else:
                env[v] = base.get(v, Fraction(0))
        for v in order:
            env[v] = subst[v].value(env)
        if any(kinds.get(v) == "int" and Fraction(env[v]).denominator != 1 for v in env):
            continue
        if check(env):
            return "sat", {v: (int(x) if isinstance(x, Fraction) and x.denominator == 1 else x)
                           for v, x in env.items()}
    return "unknown", None


def is_valid(premise, conclusion, universe: dict | None = None) -> Verdict:
    """Decide ``premise -> conclusion`` for all assignments (sound, incomplete).

    ``universe`` optionally maps variables to 'int', 'rat' or 'str'.
    """
    kinds = var_kinds(premise)
    var_kinds(conclusion, kinds)
    universe = universe or {}
    for v, k in kinds.items():
        declared = universe.get(v)
        if declared is not None and (declared == "str") != (k == "str"):
            raise LogicTypeError(f"variable {v!r} declared {declared} but used as {k}")
    full_kinds = {v: universe.get(v, "str" if k == "str" else "rat") for v, k in kinds.items()}
    all_vars = sorted(kinds)
    neg = nnf(land(premise, lnot(conclusion)))
    try:
        conjs = dnf(neg)
    except _Blowup:
        return Verdict("Unknown", reason="DNF too large")

    def check(env):
        return evaluate(premise, env) and not evaluate(conclusion, env)

    unknown = False
    for c in conjs:
        status, env = _solve_conjunct(c, check, all_vars, full_kinds)
        if status == "sat":
            return Verdict("NotValid", env)
        if status == "unknown":
            unknown = True
    if unknown:
        return Verdict("Unknown", reason="a conjunct could be neither refuted nor witnessed")
    return VALID


def is_satisfiable_witness(f, universe=None):
    """Convenience: a verified model of ``f`` if one is found, else None."""
    v = is_valid(f, FALSE, universe)
    return v.counterexample if v.status == "NotValid" else None


def grid_validity_oracle(premise, conclusion, grid: dict) -> bool:
    """Exhaustively check the implication over the product of per-variable grids."""
    names = sorted(grid)
    size = 1
    for n in names:
        size *= len(grid[n])
    if size <= 256:
        return _grid_scalar(premise, conclusion, grid, names)
    try:
        env = _grid_arrays(grid, names, land(premise, conclusion))
    except (TypeError, OverflowError):
        return _grid_scalar(premise, conclusion, grid, names)
    bad = _eval_array(premise, env) & ~_eval_array(conclusion, env)
    return not bool(bad.any())


def _grid_scalar(premise, conclusion, grid, names):
    for combo in itertools.product(*(grid[n] for n in names)):
        env = dict(zip(names, combo))
        if evaluate(premise, env) and not evaluate(conclusion, env):
            return False
    return True


def _atoms(f):
    if isinstance(f, (Atom, SAtom)):
        yield f
    elif isinstance(f, (And, Or)):
        for i in f.items:
            yield from _atoms(i)
    elif isinstance(f, Not):
        yield from _atoms(f.item)


def _lcm_den(values) -> int:
    d = 1
    for v in values:
        q = Fraction(v).denominator
        d = d * q // math.gcd(d, q)
    return d


def _grid_arrays(grid, names, f):
    """Grid columns as exact integer arrays: numbers scaled by a common
    denominator, strings replaced by their rank among all strings in play."""
    atoms = list(_atoms(f))
    nums = [v for n in names for v in grid[n] if not isinstance(v, str)]
    consts = [c for a in atoms if isinstance(a, Atom) for _, c in a.lin.coeffs] + \
             [a.lin.const for a in atoms if isinstance(a, Atom)]
    scale = _lcm_den(nums)
    cscale = _lcm_den(consts)
    strings = {v for n in names for v in grid[n] if isinstance(v, str)}
    for a in atoms:
        if isinstance(a, SAtom):
            strings |= {x for x in (a.left, a.right) if isinstance(x, str)}
    rank = {s: i for i, s in enumerate(sorted(strings))}
    idx = np.indices([len(grid[n]) for n in names]).reshape(len(names), -1)
    env = {"__scale__": (scale, cscale), "__rank__": rank}
    for k, n in enumerate(names):
        vals = grid[n]
        if all(isinstance(v, str) for v in vals):
            col = np.array([rank[v] for v in vals], dtype=np.int64)
        elif any(isinstance(v, str) for v in vals):
            raise TypeError("mixed grid")
        else:
            col = np.array([int(Fraction(v) * scale) for v in vals], dtype=np.int64)
        env[n] = col[idx[k]]
    return env


def _eval_array(f, env):
    n = len(next(iter(v for k, v in env.items() if not k.startswith("__"))))
    if isinstance(f, _Const):
        return np.full(n, f.value)
    if isinstance(f, Atom):
        scale, cscale = env["__scale__"]
        acc = np.full(n, int(f.lin.const * cscale * scale), dtype=np.int64)
        for v, c in f.lin.coeffs:
            acc = acc + int(c * cscale) * env[v]
        return _PY[f.op](acc, 0)
    if isinstance(f, SAtom):
        rank = env["__rank__"]
        side = lambda x: env[x.name] if isinstance(x, SVar) else rank[x]  # noqa: E731
        return _PY[f.op](side(f.left), side(f.right))
    if isinstance(f, And):
        out = np.full(n, True)
        for i in f.items:
            out &= _eval_array(i, env)
        return out
    if isinstance(f, Or):
        out = np.full(n, False)
        for i in f.items:
            out |= _eval_array(i, env)
        return out
    if isinstance(f, Not):
        return ~_eval_array(f.item, env)
    raise TypeError(f"not a formula: {f!r}")
