"""Self-tuning over a parameterized workload.

Each incoming query is answered in one of three modes:

* ``plain``   full evaluation,
* ``reuse``   evaluation over the instance of a catalog sketch,
* ``capture`` full evaluation with annotation propagation; the sketch is
  stored in the catalog.

Costs are abstract units: rows read plus a fixed per-query overhead, with
capture paying an extra ``capture_factor`` per row.
"""
from __future__ import annotations

import json
import logging
import math
import random
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field

from .capture import capture_rows, finalize
from .catalog import Catalog, CatalogEntry
from .evaluate import eval_plan
from .partition import Stats, build_equi_depth
from .plan import Aggregate, referenced_attrs, scanned, walk
from .relation import Relation
from .reuse import Template, find_reusable, instantiate
from .safety import check_safe
from .skipping import FragmentIndex, run_skipping

log = logging.getLogger(__name__)

STRATEGIES = ("adaptive", "eager", "plain")


@dataclass(frozen=True)
class Policy:
    selectivity_threshold: float = 0.75
    evidence_threshold: int = 3
    strategy: str = "adaptive"
    fragments: int = 1000
    query_overhead: int = 100
    capture_factor: float = 0.3
    history: int = 10

    def __post_init__(self):
        if not 0 < self.selectivity_threshold <= 1:
            raise ValueError("selectivity_threshold must be in (0, 1]")
        if self.evidence_threshold < 1:
            raise ValueError("evidence_threshold must be positive")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")


# --------------------------------------------------------------------- ledger

@dataclass(frozen=True)
class LedgerEntry:
    seq: int
    template_id: str
    binding: tuple
    mode: str
    rows_scanned: int
    rows_total: int
    cost: float
    estimate: float
    plain_cost: float
    entry_id: str | None = None


@dataclass
class CostLedger:
    entries: list = field(default_factory=list)

    def add(self, e: LedgerEntry):
        self.entries.append(e)

    def total(self, mode: str | None = None) -> float:
        return sum(e.cost for e in self.entries if mode is None or e.mode == mode)

    @property
    def c_plain(self):
        return self.total("plain")

    @property
    def c_cap(self):
        return self.total("capture")

    @property
    def c_use(self):
        return self.total("reuse")

    @property
    def c_nops_equivalent(self) -> float:
        """What the same queries would have cost without sketches."""
        return sum(e.plain_cost for e in self.entries)

    def rows_scanned(self) -> int:
        return sum(e.rows_scanned for e in self.entries)

    def cumulative(self) -> list:
        out, acc = [], 0.0
        for e in self.entries:
            acc += e.cost
            out.append(acc)
        return out

    def first(self, mode: str):
        for e in self.entries:
            if e.mode == mode:
                return e.seq
        return None

    def to_json(self) -> list:
        return [{**asdict(e), "binding": [_jsonable(v) for v in e.binding]} for e in self.entries]


def _jsonable(v):
    return v if isinstance(v, (int, float, str)) or v is None else str(v)


# ------------------------------------------------------------------- workload

@dataclass(frozen=True)
class ParamSpec:
    """``normal``: N(mean, stddev) rounded to ``step``; ``offset``: ``$base + N(mean, stddev)``;
    ``const``: fixed ``value``."""

    kind: str = "normal"
    mean: float = 0.0
    stddev: float = 0.0
    step: float = 1
    base: int = 0
    value: object = None

    def __post_init__(self):
        if self.stddev < 0:
            raise ValueError("stddev must be non-negative")
        if self.kind not in ("normal", "offset", "const"):
            raise ValueError(f"unknown parameter kind {self.kind!r}")

    @classmethod
    def from_json(cls, d):
        if isinstance(d, dict):
            return cls(**d)
        return cls(kind="const", value=d)


@dataclass(frozen=True)
class TemplateSpec:
    text: str
    params: tuple
    weight: float = 1.0

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("template weights must be positive")


@dataclass(frozen=True)
class WorkloadSpec:
    templates: tuple
    queries: int = 100
    seed: int = 0

    @classmethod
    def from_json(cls, d: dict) -> "WorkloadSpec":
        ts = tuple(TemplateSpec(t["text"], tuple(ParamSpec.from_json(p) for p in t.get("params", ())),
                                t.get("weight", 1.0)) for t in d["templates"])
        return cls(ts, d.get("queries", 100), d.get("seed", 0))

    @classmethod
    def load(cls, path: str) -> "WorkloadSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def compiled(self, schemas=None) -> dict:
        """Template id -> Template."""
        return {t.id: t for t in (Template.parse(s.text, schemas) for s in self.templates)}


def _round(x, step):
    v = round(x / step) * step
    return int(v) if float(step).is_integer() else v


def _draw(spec: ParamSpec, rng: random.Random, earlier: list):
    if spec.kind == "const":
        return spec.value
    x = rng.gauss(spec.mean, spec.stddev) if spec.stddev else spec.mean
    x = _round(x, spec.step)
    if spec.kind == "offset":
        return earlier[spec.base - 1] + x
    return x


def generate_workload(spec: WorkloadSpec, schemas=None) -> list:
    """Deterministic list of ``(template_id, binding)`` under ``spec.seed``."""
    rng = random.Random(spec.seed)
    templates = [Template.parse(t.text, schemas) for t in spec.templates]
    weights = [t.weight for t in spec.templates]
    out = []
    for _ in range(spec.queries):
        i = rng.choices(range(len(templates)), weights)[0] if len(templates) > 1 else 0
        vals = []
        for p in spec.templates[i].params:
            vals.append(_draw(p, rng, vals))
        out.append((templates[i].id, tuple(vals)))
    return out


# ---------------------------------------------------------------- the tuner

@dataclass
class Decision:
    mode: str
    estimate: float
    entry_id: str | None
    result: Relation | None
    ledger_entry: LedgerEntry


class TunerState:
    def __init__(self, db: dict, policy: Policy = Policy(), catalog: Catalog | None = None,
                 stats: Stats | None = None):
        self.db = db
        self.policy = policy
        self.stats = stats or Stats.from_db(db)
        self.catalog = catalog or Catalog()
        self.ledger = CostLedger()
        self.misses = defaultdict(int)                 # (template id, attrs) -> count
        self.realized = defaultdict(lambda: deque(maxlen=policy.history))
        self.safe_attrs_cache = {}
        self.partitions = {}
        self.index = FragmentIndex()
        self.seq = 0
        self._warned = set()

    # the first attribute the checker accepts, by preference order
    def safe_attrs(self, t: Template):
        if t.id in self.safe_attrs_cache:
            return self.safe_attrs_cache[t.id]
        choice = None
        rels = scanned(t.plan)
        once = [r for r in dict.fromkeys(rels) if rels.count(r) == 1]
        preferred = referenced_attrs(t.plan)
        for n in walk(t.plan):
            if isinstance(n, Aggregate):
                preferred += [g for g in n.group_by if g not in preferred]
        candidates = []
        for rel in once:
            names = self.stats.schemas[rel].names
            ordered = [a for a in preferred if a in names] + [a for a in names if a not in preferred]
            candidates += [(rel, a) for a in ordered]
        for rel, a in candidates:
            if not self.stats.column(rel, a).values:
                continue
            rep = check_safe(t.plan, {(rel, a)}, self.stats)
            if rep.safe:
                choice = ((rel, a),)
                break
        self.safe_attrs_cache[t.id] = choice
        return choice

    def partition_for(self, rel, attr):
        key = (rel, attr)
        if key not in self.partitions:
            self.partitions[key] = build_equi_depth(self.stats.column(rel, attr), self.policy.fragments)
        return self.partitions[key]

    def total_rows(self, plan) -> int:
        return sum(len(self.db[r].rows) for r in scanned(plan))

    def estimate(self, t: Template, entry) -> float:
        if entry is not None:
            return entry.selectivity
        hist = self.realized[t.id]
        if hist:
            return sum(hist) / len(hist)
        return 0.0


def step(state: TunerState, t: Template, binding, policy: Policy | None = None) -> Decision:
    policy = policy or state.policy
    state.seq += 1
    q = instantiate(t, binding)
    total = state.total_rows(q)
    use_sketches = policy.strategy != "plain"
    entry = find_reusable(state.catalog.entries, t, binding, state.stats) if use_sketches else None
    est = state.estimate(t, entry)

    def record(mode, rows, entry_id=None):
        rows_cost = rows * (1 + policy.capture_factor) if mode == "capture" else rows
        e = LedgerEntry(state.seq, t.id, tuple(binding), mode, rows, total,
                        rows_cost + policy.query_overhead, est,
                        total + policy.query_overhead, entry_id)
        state.ledger.add(e)
        return e

    if not use_sketches or est > policy.selectivity_threshold:
        res = eval_plan(q, state.db)
        return Decision("plain", est, None, res, record("plain", total))

    if entry is not None:
        res, counts = run_skipping(q, state.db, entry.sketches, state.index)
        rows = total - sum(c.total - c.scanned for c in counts)
        entry.uses += 1
        state.realized[t.id].append(rows / total if total else 0.0)
        return Decision("reuse", est, entry.id, res, record("reuse", rows, entry.id))

    attrs = state.safe_attrs(t)
    if attrs is None:
        if t.id not in state._warned:
            log.warning("template %s: no safe attribute found; running plain", t.id)
            state._warned.add(t.id)
        res = eval_plan(q, state.db)
        return Decision("plain", est, None, res, record("plain", total))

    key = (t.id, attrs)
    state.misses[key] += 1
    if policy.strategy == "adaptive" and state.misses[key] < policy.evidence_threshold:
        res = eval_plan(q, state.db)
        return Decision("plain", est, None, res, record("plain", total))

    state.misses[key] = 0
    parts = {rel: state.partition_for(rel, a) for rel, a in attrs}
    schema, rows, tracker = capture_rows(q, state.db, parts)
    sk = finalize(rows, tracker)
    kept = 0
    for rel, s in sk.items():
        frags = state.index.vector(s.partition, state.db[rel])
        keep = set(s.indices())
        kept += sum(1 for f in frags if f in keep)
    rel_total = sum(len(state.db[r].rows) for r in parts)
    selectivity = kept / rel_total if rel_total else 0.0
    report = check_safe(t.plan, set(attrs), state.stats)
    entry = CatalogEntry(state.catalog.next_id(), t.id, t.text, tuple(binding),
                         tuple(f"{r}.{a}" for r, a in attrs), sk, report.safe,
                         tuple(report.topk_min_rows), selectivity, state.catalog.next_seq())
    state.catalog.add(entry)
    state.realized[t.id].append(selectivity)
    res = Relation(schema, tuple(v for v, _ in rows))
    return Decision("capture", est, entry.id, res, record("capture", total, entry.id))


# ----------------------------------------------------------------- simulation

@dataclass
class SimulationReport:
    policy: Policy
    ledger: CostLedger
    plain_series: list

    @property
    def total(self) -> float:
        return self.ledger.total()

    @property
    def plain_total(self) -> float:
        return self.plain_series[-1] if self.plain_series else 0.0

    def to_json(self) -> dict:
        led = self.ledger
        return {
            "policy": asdict(self.policy),
            "queries": len(led.entries),
            "total_cost": led.total(),
            "plain_cost": self.plain_total,
            "ratio": led.total() / self.plain_total if self.plain_total else None,
            "modes": {m: sum(1 for e in led.entries if e.mode == m) for m in ("plain", "reuse", "capture")},
            "c_cap": led.c_cap,
            "c_use": led.c_use,
            "first_capture": led.first("capture"),
            "first_reuse": led.first("reuse"),
            "cumulative": {"policy": led.cumulative(), "plain": self.plain_series},
            "entries": led.to_json(),
        }


def plain_series(db: dict, templates: dict, workload, policy: Policy) -> list:
    """Cumulative cost of answering every query without sketches (analytic)."""
    out, acc = [], 0.0
    for tid, _ in workload:
        acc += sum(len(db[r].rows) for r in scanned(templates[tid].plan)) + policy.query_overhead
        out.append(acc)
    return out


def simulate(db: dict, templates: dict, workload, policy: Policy = Policy(),
             stats: Stats | None = None) -> SimulationReport:
    state = TunerState(db, policy, stats=stats)
    for tid, binding in workload:
        step(state, templates[tid], binding, policy)
    return SimulationReport(policy, state.ledger, plain_series(db, templates, workload, policy))


# ---------------------------------------------------------- synthetic setup

SYNTHETIC_TEMPLATE = ("select(total > $3, agg([g], sum(v) as total, "
                      "select(a >= $1 AND a < $2, scan(R))))")


def synthetic_db(n: int = 100_000, seed: int = 0) -> dict:
    rng = random.Random(seed)
    rows = tuple((i, rng.randrange(100_000), rng.randrange(50), rng.randint(0, 100)) for i in range(n))
    attrs = (("id", "int"), ("a", "int"), ("g", "int"), ("v", "int"))
    return {"R": Relation.from_rows("R", attrs, rows)}


def synthetic_spec(queries: int = 200, seed: int = 1) -> WorkloadSpec:
    params = (ParamSpec("normal", 50_000, 1_500, 500),
              ParamSpec("offset", 1_000, 0, 1, base=1),
              ParamSpec("const", value=10))
    return WorkloadSpec((TemplateSpec(SYNTHETIC_TEMPLATE, params),), queries, seed)


# ------------------------------------------------------- amortization model

NO_PS = "No-PS"


def optimal_option(c_nops: float, c_cap: dict, c_use: dict, n_runs: int):
    """Cheapest of running plain ``n_runs`` times or capturing once and reusing.

    ``c_cap`` and ``c_use`` map a sketch size to its capture and per-use cost.
    Ties go to ``No-PS``, then to the smaller size.
    """
    best, best_cost = NO_PS, c_nops * n_runs
    for size in sorted(c_cap):
        cost = c_cap[size] + c_use[size] * n_runs
        if cost < best_cost:
            best, best_cost = size, cost
    return best


def optimal_intervals(c_nops: float, c_cap: dict, c_use: dict) -> list:
    """``[(option, first_run, end_run_or_None)]`` over ``n_runs = 1, 2, ...``."""
    lines = [(c_nops, 0.0)] + [(c_use[s], c_cap[s]) for s in c_cap]
    cross = [1]
    for i, (s1, b1) in enumerate(lines):
        for s2, b2 in lines[i + 1:]:
            if s1 != s2:
                x = (b2 - b1) / (s1 - s2)
                if x > 0:
                    cross.append(math.floor(x) + 2)
    horizon = max(cross) + 1
    out = []
    for n in range(1, horizon + 1):
        opt = optimal_option(c_nops, c_cap, c_use, n)
        if out and out[-1][0] == opt:
            continue
        if out:
            out[-1] = (out[-1][0], out[-1][1], n)
        out.append((opt, n, None))
    return out
