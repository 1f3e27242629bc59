"""Schemas and bag relations with stable row identifiers."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import SchemaError
from .expr import kind_of_value

KINDS = ("int", "rat", "str")


@dataclass(frozen=True)
class Schema:
    name: str
    attrs: tuple  # ((attribute, kind), ...)

    def __post_init__(self):
        names = [a for a, _ in self.attrs]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate attribute names in {self.name}: {names}")
        for a, k in self.attrs:
            if k not in KINDS:
                raise SchemaError(f"unknown kind {k!r} for attribute {a}")

    @property
    def names(self) -> tuple:
        return tuple(a for a, _ in self.attrs)

    @property
    def kinds(self) -> dict:
        return dict(self.attrs)

    def index(self) -> dict:
        return {a: i for i, (a, _) in enumerate(self.attrs)}

    def position(self, attr: str) -> int:
        for i, (a, _) in enumerate(self.attrs):
            if a == attr:
                return i
        raise SchemaError(f"unknown attribute {attr!r} in {self.name}")

    def renamed(self, name: str) -> "Schema":
        return Schema(name, self.attrs)


@dataclass(frozen=True)
class Relation:
    """A bag of tuples.  Each occurrence is a separate row with its own id."""

    schema: Schema
    rows: tuple
    ids: tuple = field(default=())

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if not self.ids:
            object.__setattr__(self, "ids", tuple(f"t{i + 1}" for i in range(len(rows))))
        if len(self.ids) != len(rows):
            raise SchemaError("row-id count does not match row count")
        if len(set(self.ids)) != len(self.ids):
            raise SchemaError("row ids must be unique")
        arity = len(self.schema.attrs)
        for r in rows:
            if len(r) != arity:
                raise SchemaError(f"row {r!r} does not match arity {arity}")

    @classmethod
    def from_rows(cls, name, attrs, rows, ids=None):
        schema = Schema(name, tuple((a, k) for a, k in attrs))
        rel = cls(schema, tuple(rows), tuple(ids) if ids else ())
        rel.check_kinds()
        return rel

    @property
    def name(self) -> str:
        return self.schema.name

    def __len__(self):
        return len(self.rows)

    def check_kinds(self):
        for r in self.rows:
            for v, (a, k) in zip(r, self.schema.attrs):
                if v is None:
                    continue
                vk = kind_of_value(v)
                if k == "str" and vk != "str":
                    raise SchemaError(f"attribute {a} expects str, got {v!r}")
                if k != "str" and vk == "str":
                    raise SchemaError(f"attribute {a} expects a number, got {v!r}")
                if k == "int" and vk != "int":
                    raise SchemaError(f"attribute {a} expects int, got {v!r}")

    def bag(self) -> Counter:
        return Counter(self.rows)

    def column(self, attr: str) -> list:
        i = self.schema.position(attr)
        return [r[i] for r in self.rows]

    def restrict(self, keep_ids) -> "Relation":
        keep = set(keep_ids)
        pairs = [(r, i) for r, i in zip(self.rows, self.ids) if i in keep]
        return Relation(self.schema, tuple(r for r, _ in pairs), tuple(i for _, i in pairs))

    def without(self, drop_ids) -> "Relation":
        drop = set(drop_ids)
        pairs = [(r, i) for r, i in zip(self.rows, self.ids) if i not in drop]
        return Relation(self.schema, tuple(r for r, _ in pairs), tuple(i for _, i in pairs))


def same_bag(a: Relation, b: Relation) -> bool:
    return a.schema.attrs == b.schema.attrs and a.bag() == b.bag()
