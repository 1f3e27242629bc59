"""Randomized soundness experiments shared by the test suite and ``scripts/``.

Each ``*_suite`` function runs until it has collected ``n`` qualifying cases
(or hit ``max_cases``) and returns a :class:`SuiteResult`.  A violation is a
case where a positive verdict (Safe, Reusable, Valid, ...) is contradicted by
direct evaluation; examples of violations are kept for diagnosis.
"""
from __future__ import annotations

import random
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from . import logic as L
from .capture import capture
from .evaluate import eval_plan, whole_lineage
from .partition import Stats
from .plan import scanned, to_text
from .randgen import PlanGen, nearby_binding, random_binding, random_db, random_partition
from .reuse import Template, check_reusable, instantiate
from .safety import check_safe
from .sketch import BitSketch, SketchSet, accurate_sketch, empirically_safe, instance
from .skipping import quse, run_skipping


@dataclass
class SuiteResult:
    name: str
    cases: int = 0                 # qualifying cases checked
    tried: int = 0                 # all generated cases
    violations: int = 0
    seconds: float = 0.0
    counts: Counter = field(default_factory=Counter)
    examples: list = field(default_factory=list)

    def fail(self, text: str):
        self.violations += 1
        if len(self.examples) < 5:
            self.examples.append(text)

    def summary(self) -> str:
        extra = ", ".join(f"{k}={v}" for k, v in sorted(self.counts.items()))
        return (f"{self.name}: {self.cases} cases ({self.tried} generated), "
                f"{self.violations} violations, {self.seconds:.1f}s" + (f" [{extra}]" if extra else ""))


def _case(rng, with_params=False):
    db = random_db(rng)
    stats = Stats.from_db(db)
    gen = PlanGen(rng, stats.schemas, params=with_params)
    plan = gen.template() if with_params else gen.plan()
    return db, stats, gen, plan


# ------------------------------------------------------------------- safety

def safety_suite(n: int = 1000, seed: int = 0, max_cases: int = 100_000,
                 supersets: bool = False) -> SuiteResult:
    """Safe verdicts versus accurate and captured sketches (and optionally random supersets)."""
    rng = random.Random(seed)
    res = SuiteResult("safety soundness")
    t0 = time.perf_counter()
    while res.cases < n and res.tried < max_cases:
        res.tried += 1
        db, stats, _, plan = _case(rng)
        rels = sorted(set(scanned(plan)))
        chosen = rng.sample(rels, rng.randint(1, len(rels)))
        X = {(r, rng.choice(stats.schemas[r].names)) for r in chosen}
        report = check_safe(plan, X, stats)
        res.counts[report.verdict] += 1
        if not report.safe:
            continue
        res.cases += 1
        parts = {r: random_partition(rng, db[r], a) for r, a in X}
        sets = {"accurate": SketchSet({r: accurate_sketch(plan, db, p) for r, p in parts.items()}),
                "captured": capture(plan, db, parts)}
        if supersets:
            sets["superset"] = SketchSet({
                r: BitSketch.from_indices(s.partition, set(s.indices())
                                          | {j for j in range(1, s.n + 1) if rng.random() < 0.3})
                for r, s in sets["accurate"].items()})
        bad = [k for k, s in sets.items() if not empirically_safe(plan, db, s)]
        if bad:
            res.fail(f"{bad} {to_text(plan)} X={sorted(X)}")
    res.seconds = time.perf_counter() - t0
    return res


# -------------------------------------------------------------------- reuse

def reuse_suite(n: int = 1000, seed: int = 0, max_cases: int = 100_000,
                pairs_per_template: int = 3) -> SuiteResult:
    """Reusable verdicts versus lineage containment and the captured sketch."""
    rng = random.Random(seed)
    res = SuiteResult("reuse soundness")
    t0 = time.perf_counter()
    while res.cases < n and res.tried < max_cases:
        db, stats, gen, plan = _case(rng, with_params=True)
        t = Template.of(plan)
        rels = sorted(set(scanned(plan)))
        rel = rng.choice(rels)
        attr = rng.choice(stats.schemas[rel].names)
        if not check_safe(plan, {(rel, attr)}, stats).safe:
            res.tried += 1
            res.counts["not safe"] += 1
            continue
        part = random_partition(rng, db[rel], attr)
        for _ in range(pairs_per_template):
            res.tried += 1
            b1 = random_binding(rng, gen.param_kinds)
            b2 = b1 if rng.random() < 0.2 else nearby_binding(rng, b1, gen.param_kinds)
            if not check_reusable(t, b1, b2, stats).reusable:
                res.counts["not reusable"] += 1
                continue
            res.cases += 1
            q1, q2 = instantiate(t, b1), instantiate(t, b2)
            problems = []
            if not whole_lineage(q2, db) <= whole_lineage(q1, db):
                problems.append("lineage")
            if not empirically_safe(q2, db, capture(q1, db, {rel: part})):
                problems.append("captured sketch")
            if not empirically_safe(q2, db, SketchSet.of(accurate_sketch(q1, db, part))):
                problems.append("accurate sketch")
            if problems:
                res.fail(f"{problems} {t.text} {b1} -> {b2} X={rel}.{attr}")
    res.seconds = time.perf_counter() - t0
    return res


# ----------------------------------------------------------------- skipping

def skipping_suite(n: int = 1000, seed: int = 0, max_cases: int = 100_000) -> SuiteResult:
    """quse rewriting, sketch instances and skipping scans agree with full evaluation."""
    rng = random.Random(seed)
    res = SuiteResult("skipping equivalence")
    t0 = time.perf_counter()
    while res.cases < n and res.tried < max_cases:
        res.tried += 1
        db, stats, _, plan = _case(rng)
        rels = sorted(set(scanned(plan)))
        chosen = rng.sample(rels, rng.randint(1, len(rels)))
        X = {(r, rng.choice(stats.schemas[r].names)) for r in chosen}
        if not check_safe(plan, X, stats).safe:
            continue
        res.cases += 1
        parts = {r: random_partition(rng, db[r], a) for r, a in X}
        S = capture(plan, db, parts)
        full = eval_plan(plan, db).bag()
        via_inst = eval_plan(plan, instance(S, db)).bag()
        via_quse = eval_plan(quse(plan, S), db).bag()
        via_member = eval_plan(quse(plan, S, use_member=True), db).bag()
        via_scan = run_skipping(plan, db, S)[0].bag()
        if not (full == via_inst == via_quse == via_member == via_scan):
            res.fail(f"{to_text(plan)} X={sorted(X)}")
    res.seconds = time.perf_counter() - t0
    return res


# ------------------------------------------------------------------- prover

_NUM_VARS = ("x", "y", "z")
_STR_CONSTS = ("b", "d", "f")


class FormulaGen:
    """Random implications over a few numeric and string variables."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        nv = rng.randint(1, 3)
        self.nums = list(_NUM_VARS[:nv])
        self.strs = ["s"] if rng.random() < 0.3 else []
        self.kinds = {v: rng.choice(("int", "rat")) for v in self.nums}
        self.kinds.update({v: "str" for v in self.strs})

    def atom(self):
        rng = self.rng
        op = rng.choice(L.OPS)
        if self.strs and rng.random() < 0.25:
            right = rng.choice(_STR_CONSTS)
            return L.cmp(op, L.SVar("s"), right)
        k = rng.choice((1, 1, 1, 2)) if len(self.nums) > 1 else 1
        vs = rng.sample(self.nums, min(k, len(self.nums)))
        coeffs = {v: rng.choice((1, 1, -1, 2)) for v in vs}
        if len(vs) == 2 and rng.random() < 0.7:
            coeffs = {vs[0]: 1, vs[1]: -1}  # difference shape
        return L.Atom(op, L.Lin.of(coeffs, Fraction(rng.randint(-6, 6), rng.choice((1, 1, 2)))))

    def formula(self, depth=0):
        r = self.rng.random()
        if depth < 2 and r < 0.45:
            return L.land(*(self.formula(depth + 1) for _ in range(self.rng.randint(2, 3))))
        if depth < 2 and r < 0.6:
            return L.lor(self.formula(depth + 1), self.formula(depth + 1))
        if depth < 2 and r < 0.65:
            return L.lnot(self.formula(depth + 1))
        return self.atom()

    def weaken(self, f):
        """A formula the premise is likely (not certain) to imply."""
        cs = L.conjuncts(f)
        c = self.rng.choice(cs)
        if isinstance(c, L.Atom) and self.rng.random() < 0.6:
            relax = {"<": "<=", "=": "<=", ">": ">=", "<=": "<=", ">=": ">=", "<>": "<>"}[c.op]
            shift = Fraction(self.rng.randint(0, 2)) * (1 if relax == "<=" else -1 if relax == ">=" else 0)
            return L.Atom(relax, L.Lin(c.lin.coeffs, c.lin.const - shift))
        return c

    def grid(self) -> dict:
        g = {}
        for v in self.nums:
            ints = list(range(-8, 9))
            g[v] = ints if self.kinds[v] == "int" else ints + [Fraction(2 * i + 1, 2) for i in range(-8, 8)]
        if self.strs:
            g["s"] = ["", "a", "b", "c", "d", "e", "f", "g"]
        return g


def prover_suite(n: int = 10_000, seed: int = 0) -> SuiteResult:
    """is_valid against exhaustive grid evaluation.

    Valid must survive the grid; a NotValid counterexample must falsify the
    implication when substituted.
    """
    rng = random.Random(seed)
    res = SuiteResult("prover soundness")
    t0 = time.perf_counter()
    while res.cases < n:
        res.tried += 1
        g = FormulaGen(rng)
        premise = g.formula()
        conclusion = g.weaken(premise) if rng.random() < 0.5 else g.formula(1)
        v = L.is_valid(premise, conclusion, g.kinds)
        res.cases += 1
        res.counts[v.status] += 1
        if v.status == "Valid":
            if not L.grid_validity_oracle(premise, conclusion, _trim(g.grid(), premise, conclusion)):
                res.fail(f"false Valid: {L.to_sexpr(premise)} -> {L.to_sexpr(conclusion)}")
        elif v.status == "NotValid":
            env = dict(v.counterexample)
            for var in L.formula_vars(L.land(premise, conclusion)):
                env.setdefault(var, "" if g.kinds.get(var) == "str" else 0)
            if not (L.evaluate(premise, env) and not L.evaluate(conclusion, env)):
                res.fail(f"bad counterexample {v}: {L.to_sexpr(premise)} -> {L.to_sexpr(conclusion)}")
    res.seconds = time.perf_counter() - t0
    return res


def _trim(grid, *fs):
    used = set()
    for f in fs:
        used |= L.formula_vars(f)
    return {v: vals for v, vals in grid.items() if v in used}


__all__ = ["SuiteResult", "FormulaGen", "safety_suite", "reuse_suite", "skipping_suite",
           "prover_suite"]
