"""Sketch capture by annotation propagation.

Each row carries one annotation per partitioned relation.  A fresh scan row
holds just its fragment index (a plain ``int``); the first merge turns the
annotation into a bit vector.  Aggregation and duplicate removal fold their
inputs with a word-wise OR into a fresh accumulator, min/max keep the
annotation of one extreme row, and the final step ORs everything left.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import CaptureError
from .evaluate import Evaluator
from .expr import cond_to_text, render_value
from .partition import POS_INF, RangePartition, fragment_vector
from .plan import (
    Aggregate, Cross, Dedup, Join, Project, Scan, Select, TopK, Union,
    output_schema, plan_params, scanned, to_text,
)
from .relation import Relation
from .sketch import BitSketch, SketchAccumulator, SketchSet, singleton

_EMPTY = {}


@dataclass(frozen=True)
class AnnotatedRelation:
    relation: Relation
    partition: RangePartition
    annotations: tuple  # fragment index per row

    def printed(self) -> list:
        return [singleton(self.partition, i).to_binary() for i in self.annotations]


def init_annotations(r: Relation, p: RangePartition) -> AnnotatedRelation:
    if p.relation != r.name:
        raise CaptureError(f"partition targets {p.relation}, not {r.name}")
    return AnnotatedRelation(r, p, tuple(fragment_vector(p, r)))


class CaptureTracker:
    """Annotations are dicts relation -> (int fragment index | BitSketch)."""

    def __init__(self, partitions: dict, db: dict):
        self.partitions = partitions
        self.frags = {rel: fragment_vector(p, db[rel]) for rel, p in partitions.items()}

    def leaf(self, rel, ordinal, rowid):
        f = self.frags.get(rel)
        if f is None:
            return _EMPTY
        return {rel: f[ordinal]}

    def join(self, a, b):
        if not a:
            return b
        if not b:
            return a
        return {**a, **b}

    def merge(self, anns):
        if len(anns) == 1:
            return anns[0]
        rels = set()
        for a in anns:
            rels.update(a)
        if not rels:
            return _EMPTY
        out = {}
        for rel in rels:
            acc = SketchAccumulator(self.partitions[rel])
            for a in anns:
                v = a.get(rel)
                if v is None:
                    continue
                if isinstance(v, int):
                    acc.add_index(v)
                else:
                    acc.add_sketch(v)
            out[rel] = acc.freeze()
        return out

    def extreme(self, anns, chosen):
        return chosen


def _check_capture_plan(plan, db, partitions):
    if plan_params(plan):
        raise CaptureError(f"unbound parameters: {sorted(plan_params(plan))}")
    counts = Counter(scanned(plan))
    for rel, p in partitions.items():
        if p.relation != rel:
            raise CaptureError(f"partition for {p.relation} filed under {rel}")
        if counts[rel] != 1:
            raise CaptureError(f"relation {rel} must be accessed exactly once (found {counts[rel]})")
        if rel not in db:
            raise CaptureError(f"unknown relation {rel}")


def _normalize(partitions) -> dict:
    if isinstance(partitions, RangePartition):
        partitions = [partitions]
    if isinstance(partitions, dict):
        return dict(partitions)
    out = {}
    for p in partitions:
        if p.relation in out:
            raise CaptureError(f"two partitions for relation {p.relation}")
        out[p.relation] = p
    return out


def capture_rows(plan, db: dict, partitions):
    """Run the annotated evaluation; returns ``(schema, [(values, annotations)])``."""
    parts = _normalize(partitions)
    _check_capture_plan(plan, db, parts)
    tracker = CaptureTracker(parts, db)
    schema, rows = Evaluator(db, tracker).run(plan)
    return schema, [(r[0], r[2]) for r in rows], tracker


def finalize(rows, tracker: CaptureTracker) -> SketchSet:
    """OR the annotations of all result rows into one sketch per partition."""
    final = tracker.merge([a for _, a in rows]) if rows else _EMPTY
    out = SketchSet()
    for rel, p in tracker.partitions.items():
        v = final.get(rel)
        if v is None:
            out[rel] = BitSketch.zeros(p)
        elif isinstance(v, int):
            out[rel] = singleton(p, v)
        else:
            out[rel] = v
    return out


def capture(plan, db: dict, partitions) -> SketchSet:
    """One sketch per partitioned relation covering the query's provenance."""
    _, rows, tracker = capture_rows(plan, db, partitions)
    return finalize(rows, tracker)


# ------------------------------------------------------------- rewrite text

def _fragment_expr(p: RangePartition) -> str:
    finite = [u for u in p.boundaries if u is not POS_INF]
    whens = []
    for i, u in enumerate(finite, start=1):
        bits = ["0"] * p.size
        bits[i - 1] = "1"
        whens.append(f"WHEN {p.attribute} <= {render_value(u)} THEN '{''.join(bits)}'")
    bits = ["0"] * p.size
    bits[-1] = "1"
    return "CASE " + " ".join(whens) + f" ELSE '{''.join(bits)}' END"


def show_rewrite(plan, partitions, schemas: dict) -> str:
    """Instrumented query text: CASE-based fragment columns at the scans,
    bitor folds at aggregations, and a final bitor over all result rows."""
    parts = _normalize(partitions)
    cols = {rel: f"ps_{rel}_{p.attribute}" for rel, p in parts.items()}

    def ann_cols(node):
        return [cols[r] for r in scanned(node) if r in cols]

    def rw(node) -> str:
        if isinstance(node, Scan):
            if node.relation not in parts:
                return to_text(node)
            s = output_schema(node, schemas)
            items = [f"{a} as {a}" for a in s.names]
            items.append(f"{_fragment_expr(parts[node.relation])} as {cols[node.relation]}")
            return f"project([{', '.join(items)}], {to_text(node)})"
        if isinstance(node, Select):
            return f"select({cond_to_text(node.cond)}, {rw(node.child)})"
        if isinstance(node, Project):
            body = to_text(Project(node.items, Scan("_")))
            items = body[len("project(["):body.rindex("], scan(_))")]
            extra = ", ".join(f"{c} as {c}" for c in ann_cols(node))
            sep = ", " if extra else ""
            return f"project([{items}{sep}{extra}], {rw(node.child)})"
        if isinstance(node, Dedup):
            s = output_schema(node, schemas)
            folds = ", ".join(f"bitor({c}) as {c}" for c in ann_cols(node))
            return f"agg([{', '.join(s.names)}], {folds}, {rw(node.child)})"
        if isinstance(node, (Cross, Union)):
            op = "cross" if isinstance(node, Cross) else "union"
            return f"{op}({rw(node.left)}, {rw(node.right)})"
        if isinstance(node, Join):
            return f"join({node.left_attr} = {node.right_attr}, {rw(node.left)}, {rw(node.right)})"
        if isinstance(node, Aggregate):
            arg = "*" if node.arg is None else node.arg
            fn = f"{node.func}({arg}) as {node.out}"
            folds = ", ".join(
                f"{'extreme_' + node.func if node.func in ('min', 'max') else 'bitor'}({c}) as {c}"
                for c in ann_cols(node))
            sep = ", " if folds else ""
            return f"agg([{', '.join(node.group_by)}], {fn}{sep}{folds}, {rw(node.child)})"
        if isinstance(node, TopK):
            head = to_text(TopK(node.keys, node.count, Scan("_")))
            return head[:head.rindex("scan(_))")] + rw(node.child) + ")"
        raise TypeError(node)

    folds = ", ".join(f"bitor({c}) as {c}" for c in cols.values())
    return f"agg([], {folds}, {rw(plan)})"

