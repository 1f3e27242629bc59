"""Command-line interface.

Exit codes: 0 success, 1 negative verdict (Unknown / not reusable / refused
capture), 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .capture import capture, show_rewrite
from .catalog import Catalog, CatalogEntry, CatalogError
from .errors import PBDSError
from .evaluate import eval_plan, eval_with_lineage
from .expr import render_value
from .parser import parse_query
from .partition import RangePartition, Stats, build_equi_depth, value_from_text
from .plan import plan_params, scanned
from .reuse import Template, check_reusable, instantiate
from .safety import check_safe
from .skipping import run_skipping
from .sketch import restrict_relation
from .storage import load_dir, parse_schema_decl, read_csv, store
from .tuning import Policy, WorkloadSpec, generate_workload, simulate, synthetic_db

OK, NEGATIVE, ERROR = 0, 1, 2


class UsageError(PBDSError):
    pass


# ---------------------------------------------------------------- helpers

def parse_value(text: str):
    t = text.strip()
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "'\"":
        return t[1:-1]
    try:
        return int(t)
    except ValueError:
        pass
    try:
        v = Fraction(t)
        return int(v) if v.denominator == 1 else v
    except ValueError:
        return t


def parse_binding(text: str | None) -> tuple:
    if not text:
        return ()
    return tuple(parse_value(v) for v in text.split(","))


def parse_attrs(text: str) -> set:
    out = set()
    for item in text.split(","):
        rel, dot, attr = item.strip().partition(".")
        if not dot or not rel or not attr:
            raise UsageError(f"attribute {item!r} must be written RELATION.ATTRIBUTE")
        out.add((rel, attr))
    return out


def parse_partition(spec: str, db: dict, stats: Stats) -> RangePartition:
    """``R.a:equi-depth:K`` or ``R.a:bounds:V1,V2,...``."""
    try:
        target, method, arg = spec.split(":", 2)
    except ValueError:
        raise UsageError(f"partition {spec!r} must look like R.a:equi-depth:K or R.a:bounds:V,...") from None
    ((rel, attr),) = parse_attrs(target)
    if rel not in db:
        raise UsageError(f"unknown relation {rel}")
    kind = db[rel].schema.kinds.get(attr)
    if kind is None:
        raise UsageError(f"unknown attribute {rel}.{attr}")
    if method == "equi-depth":
        try:
            k = int(arg)
        except ValueError:
            raise UsageError(f"fragment count {arg!r} is not an integer") from None
        return build_equi_depth(stats.column(rel, attr), k)
    if method == "bounds":
        return RangePartition(rel, attr, tuple(value_from_text(v.strip(), kind) for v in arg.split(",")))
    raise UsageError(f"unknown partition method {method!r}")


def _cell(v) -> str:
    if v is None:
        return "null"
    return v if isinstance(v, str) else render_value(v)


def format_table(schema, rows) -> str:
    names = list(schema.names)
    cells = [[_cell(v) for v in r] for r in rows]
    widths = [max([len(n)] + [len(c[i]) for c in cells]) for i, n in enumerate(names)]
    line = lambda vals: " | ".join(v.ljust(w) for v, w in zip(vals, widths)).rstrip()  # noqa: E731
    out = [line(names), "-+-".join("-" * w for w in widths)]
    out += [line(c) for c in cells]
    out.append(f"({len(rows)} row{'s' if len(rows) != 1 else ''})")
    return "\n".join(out)


class Env:
    def __init__(self, args):
        self.args = args
        self.data = args.data
        self.catalog_path = args.catalog or os.path.join(self.data, "catalog.jsonl")
        self._db = None
        self._stats = None

    @property
    def db(self):
        if self._db is None:
            self._db = load_dir(self.data)
        return self._db

    @property
    def stats(self):
        if self._stats is None:
            self._stats = Stats.from_db(self.db)
        return self._stats

    def catalog(self) -> Catalog:
        return Catalog.open(self.catalog_path)

    def plan(self, text, binding=()):
        p = parse_query(text, {n: r.schema for n, r in self.db.items()})
        t = Template.of(p)
        if plan_params(p) or binding:
            return t, binding, instantiate(t, binding)
        return t, (), p


def _out(text=""):
    print(text)


# ---------------------------------------------------------------- commands

def cmd_load(env: Env):
    a = env.args
    attrs = parse_schema_decl(a.schema)
    rel = read_csv(a.csv, a.name, attrs)
    store(env.data, rel, replace=a.replace)
    _out(f"loaded {rel.name}: {len(rel)} rows, ids t1..t{len(rel)}" if len(rel) else
         f"loaded {rel.name}: 0 rows")
    return OK


def cmd_run(env: Env):
    a = env.args
    t, binding, q = env.plan(a.plan, parse_binding(a.bind))
    if a.use_sketch:
        e = env.catalog().get(a.use_sketch)
        if e.template_id != t.id:
            print(f"warning: {e.id} was captured for a different template", file=sys.stderr)
        elif not e.safe:
            print(f"warning: {e.id} is not on a safe attribute set", file=sys.stderr)
        elif not check_reusable(t, e.binding, binding, env.stats).reusable:
            print(f"warning: reuse of {e.id} for this binding is not verified", file=sys.stderr)
        res, counts = run_skipping(q, env.db, e.sketches)
        _out(format_table(res.schema, res.rows))
        for c in counts:
            _out(f"{c.relation}: scanned {c.scanned} of {c.total} rows")
        return OK
    if a.lineage:
        res, lin = eval_with_lineage(q, env.db)
        _out(format_table(res.schema, res.rows))
        for r, l in zip(res.rows, lin):
            ids = ", ".join(f"{rel}.{rid}" for rel, rid in sorted(l))
            _out(f"lineage {tuple(r)}: {{{ids}}}")
        return OK
    res = eval_plan(q, env.db)
    _out(format_table(res.schema, res.rows))
    for rel in dict.fromkeys(scanned(q)):
        _out(f"{rel}: scanned {len(env.db[rel])} of {len(env.db[rel])} rows")
    return OK


def cmd_capture(env: Env):
    a = env.args
    t, binding, q = env.plan(a.plan, parse_binding(a.bind))
    parts = {}
    for spec in a.partition:
        p = parse_partition(spec, env.db, env.stats)
        if p.relation in parts:
            raise UsageError(f"two partitions for relation {p.relation}")
        parts[p.relation] = p
    attrs = {(p.relation, p.attribute) for p in parts.values()}
    report = check_safe(t.plan, attrs, env.stats)
    if not report.safe and not a.force:
        _out(f"refusing to capture: attributes are not known to be safe (verdict {report.verdict});"
             " use --force to capture anyway")
        return NEGATIVE
    if a.show_rewrite:
        _out(show_rewrite(q, parts, {n: r.schema for n, r in env.db.items()}))
    sk = capture(q, env.db, parts)
    total = sum(len(env.db[r]) for r in parts)
    kept = 0
    for rel, s in sk.items():
        kept += len(restrict_relation(env.db[rel], s))
    cat = env.catalog()
    entry = CatalogEntry(cat.next_id(), t.id, t.text, binding,
                         tuple(f"{r}.{x}" for r, x in sorted(attrs)), sk, report.safe,
                         tuple(report.topk_min_rows), kept / total if total else 0.0,
                         cat.next_seq(), forced=not report.safe)
    cat.add(entry)
    _out(f"entry {entry.id}" + ("" if report.safe else " (forced: attributes not verified safe)"))
    for rel, s in sorted(sk.items()):
        _out(f"{rel}.{s.partition.attribute}: {s.to_binary()} {s.to_hex()}"
             f" ({s.count()} of {s.n} fragments)")
    return OK


def cmd_check_safe(env: Env):
    a = env.args
    p = parse_query(a.plan, {n: r.schema for n, r in env.db.items()})
    report = check_safe(p, parse_attrs(a.attrs), env.stats)
    _out(report.explain() if a.explain else report.verdict)
    return OK if report.safe else NEGATIVE


def cmd_check_reuse(env: Env):
    a = env.args
    t = Template.of(parse_query(a.template, {n: r.schema for n, r in env.db.items()}))
    report = check_reusable(t, parse_binding(a.captured), parse_binding(a.incoming), env.stats)
    _out(report.explain() if a.explain else report.verdict)
    return OK if report.reusable else NEGATIVE


def cmd_simulate(env: Env):
    a = env.args
    with open(a.workload, encoding="utf-8") as fh:
        raw = json.load(fh)
    spec = WorkloadSpec.from_json(raw)
    if a.seed is not None:
        spec = WorkloadSpec(spec.templates, spec.queries, a.seed)
    if "synthetic" in raw:
        syn = raw["synthetic"] or {}
        db = synthetic_db(syn.get("rows", 100_000), syn.get("seed", 0))
    else:
        db = env.db
    policy = Policy(**{**raw.get("policy", {}), "strategy": a.policy})
    schemas = {n: r.schema for n, r in db.items()}
    templates = spec.compiled(schemas)
    workload = generate_workload(spec, schemas)
    rep = simulate(db, templates, workload, policy)
    body = rep.to_json()
    if a.report:
        with open(a.report, "w", encoding="utf-8") as fh:
            json.dump(body, fh, indent=1, sort_keys=True)
    ratio = body["ratio"]
    _out(f"queries {body['queries']}: plain {body['modes']['plain']}, "
         f"reuse {body['modes']['reuse']}, capture {body['modes']['capture']}")
    _out(f"cost {body['total_cost']:.0f} vs plain {body['plain_cost']:.0f}"
         + (f" ({ratio:.1%})" if ratio is not None else ""))
    _out(f"first capture at query {body['first_capture']}, first reuse at query {body['first_reuse']}")
    return OK


def cmd_catalog(env: Env):
    a = env.args
    cat = env.catalog()
    if a.action == "list":
        _out("id | template | binding | attrs | bits | safe | uses")
        for e in cat.entries:
            b = ",".join(render_value(v) for v in e.binding)
            _out(f"{e.id} | {e.template_id} | {b} | {','.join(e.attrs)} | {e.bits()} | "
                 f"{'yes' if e.safe else 'no'} | {e.uses}")
        return OK
    if not a.id:
        raise UsageError(f"catalog {a.action} needs an entry id")
    if a.action == "show":
        e = cat.get(a.id)
        _out(f"entry {e.id}\ntemplate {e.template_id}: {e.template}")
        _out(f"binding: {', '.join(render_value(v) for v in e.binding) or '(none)'}")
        _out(f"safe: {e.safe}{' (forced)' if e.forced else ''}; selectivity {e.selectivity:.4f}")
        for rel, s in sorted(e.sketches.items()):
            p = s.partition
            _out(f"{rel}.{p.attribute}: {s.to_binary()} {s.to_hex()} ({s.nbytes} bytes, {p.size} fragments)")
        return OK
    cat.drop(a.id)
    _out(f"dropped {a.id}")
    return OK


COMMANDS = {
    "load": cmd_load, "run": cmd_run, "capture": cmd_capture, "check-safe": cmd_check_safe,
    "check-reuse": cmd_check_reuse, "simulate": cmd_simulate, "catalog": cmd_catalog,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", default=argparse.SUPPRESS, help="data directory (default: ./data)")
    common.add_argument("--catalog", default=argparse.SUPPRESS, help="catalog file (default: DATA/catalog.jsonl)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed override")

    ap = argparse.ArgumentParser(prog="pbds", parents=[common],
                                 description="Provenance-based data skipping toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load", parents=[common], help="ingest a CSV file into the data directory")
    p.add_argument("csv")
    p.add_argument("--name", required=True)
    p.add_argument("--schema", required=True, help="attribute declarations, e.g. popden:int,city:str")
    p.add_argument("--replace", action="store_true")

    p = sub.add_parser("run", parents=[common], help="evaluate a query")
    p.add_argument("plan")
    p.add_argument("--bind", help="comma-separated parameter values")
    p.add_argument("--use-sketch", metavar="ENTRY_ID")
    p.add_argument("--lineage", action="store_true", help="print the lineage of every result row")

    p = sub.add_parser("capture", parents=[common], help="capture a provenance sketch")
    p.add_argument("plan")
    p.add_argument("--partition", action="append", required=True,
                   help="R.a:equi-depth:K or R.a:bounds:V1,V2,...")
    p.add_argument("--bind")
    p.add_argument("--force", action="store_true", help="capture even if safety is not established")
    p.add_argument("--show-rewrite", action="store_true")

    p = sub.add_parser("check-safe", parents=[common], help="static safety check")
    p.add_argument("plan")
    p.add_argument("--attrs", required=True)
    p.add_argument("--explain", action="store_true")

    p = sub.add_parser("check-reuse", parents=[common], help="static reuse check between two bindings")
    p.add_argument("template")
    p.add_argument("--captured", required=True)
    p.add_argument("--incoming", required=True)
    p.add_argument("--explain", action="store_true")

    p = sub.add_parser("simulate", parents=[common], help="run the self-tuning loop over a workload")
    p.add_argument("--workload", required=True)
    p.add_argument("--policy", choices=("adaptive", "eager", "plain"), default="adaptive")
    p.add_argument("--report")

    p = sub.add_parser("catalog", parents=[common], help="inspect the sketch catalog")
    p.add_argument("action", choices=("list", "show", "drop"))
    p.add_argument("id", nargs="?")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("data", "data"), ("catalog", None), ("seed", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        return COMMANDS[args.command](Env(args))
    except (PBDSError, CatalogError, OSError, json.JSONDecodeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
