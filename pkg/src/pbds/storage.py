"""Data directory: ``NAME.csv`` plus a ``NAME.schema.json`` sidecar per relation."""
from __future__ import annotations

import csv
import json
import os
from fractions import Fraction

from .errors import DataError
from .relation import KINDS, Relation


def parse_schema_decl(text: str) -> tuple:
    """``"popden:int,city:str"`` -> ``(("popden", "int"), ("city", "str"))``."""
    attrs = []
    for part in text.split(","):
        name, _, kind = part.strip().partition(":")
        if not name or kind not in KINDS:
            raise DataError(f"bad attribute declaration {part.strip()!r} (want name:int|rat|str)")
        attrs.append((name, kind))
    return tuple(attrs)


def _cell(text: str, kind: str, line: int, attr: str):
    if kind == "str":
        return text
    if text.strip() == "":
        return None
    try:
        if kind == "int":
            return int(text)
        v = Fraction(text.strip())
        return int(v) if v.denominator == 1 else v
    except ValueError:
        raise DataError(f"{attr}: cannot read {text!r} as {kind}", line) from None


def read_csv(path: str, name: str, attrs: tuple) -> Relation:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: missing header row", 1)
        want = [a for a, _ in attrs]
        if [h.strip() for h in header] != want:
            raise DataError(f"header {header} does not match declared attributes {want}", 1)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(attrs):
                raise DataError(f"expected {len(attrs)} fields, got {len(row)}", line)
            rows.append(tuple(_cell(v, k, line, a) for v, (a, k) in zip(row, attrs)))
    return Relation.from_rows(name, attrs, rows)


def write_csv(path: str, rel: Relation):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(rel.schema.names)
        for r in rel.rows:
            w.writerow(["" if v is None else str(v) for v in r])


def _paths(data_dir, name):
    return os.path.join(data_dir, f"{name}.csv"), os.path.join(data_dir, f"{name}.schema.json")


def store(data_dir: str, rel: Relation, replace: bool = False):
    os.makedirs(data_dir, exist_ok=True)
    csv_path, schema_path = _paths(data_dir, rel.name)
    if not replace and os.path.exists(schema_path):
        raise DataError(f"relation {rel.name} already exists in {data_dir}")
    write_csv(csv_path, rel)
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump({"name": rel.name, "attrs": [list(a) for a in rel.schema.attrs]}, fh, indent=1)


def load_dir(data_dir: str) -> dict:
    """All relations of a data directory, keyed by name."""
    if not os.path.isdir(data_dir):
        raise DataError(f"data directory {data_dir} does not exist")
    db = {}
    for fn in sorted(os.listdir(data_dir)):
        if not fn.endswith(".schema.json"):
            continue
        with open(os.path.join(data_dir, fn), encoding="utf-8") as fh:
            meta = json.load(fh)
        name = meta["name"]
        attrs = tuple((a, k) for a, k in meta["attrs"])
        db[name] = read_csv(_paths(data_dir, name)[0], name, attrs)
    return db
