"""Range partitions over a single attribute and equi-depth construction."""
from __future__ import annotations

import hashlib
import json
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import PartitionError
from .expr import kind_of_value, render_value
from .relation import Relation


class _PosInf:
    """Upper sentinel that compares above every value."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __repr__(self):
        return "+inf"

    def __reduce__(self):
        return (_PosInf, ())


POS_INF = _PosInf()


def _kind_group(v):
    return "str" if isinstance(v, str) else "num"


@dataclass(frozen=True)
class RangePartition:
    """Fragment ``i`` (1-based) holds values ``v`` with ``u[i-1] < v <= u[i]``.

    ``boundaries`` always ends with :data:`POS_INF`, so the fragments cover the
    whole domain.
    """

    relation: str
    attribute: str
    boundaries: tuple
    labels: tuple = field(default=())

    def __post_init__(self):
        b = tuple(self.boundaries)
        if not b or b[-1] is not POS_INF:
            b = b + (POS_INF,)
        finite = b[:-1]
        if any(x is POS_INF for x in finite):
            raise PartitionError("+inf may only be the last boundary")
        if len({_kind_group(x) for x in finite}) > 1:
            raise PartitionError("boundaries mix strings and numbers")
        for x, y in zip(finite, finite[1:]):
            if not x < y:
                raise PartitionError(f"boundaries must be strictly increasing: {x!r} !< {y!r}")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "_finite", list(finite))
        if self.labels:
            if len(self.labels) != len(b):
                raise PartitionError("one label per fragment required")
            object.__setattr__(self, "labels", tuple(self.labels))
        else:
            object.__setattr__(self, "labels", tuple(self._default_labels()))

    def _default_labels(self):
        out = []
        lo = "-inf"
        for u in self.boundaries:
            hi = "+inf" if u is POS_INF else render_value(u)
            out.append(f"({lo}, {hi}]")
            lo = hi
        return out

    @property
    def size(self) -> int:
        return len(self.boundaries)

    @property
    def finite_boundaries(self) -> list:
        return list(self._finite)

    @property
    def value_kind(self):
        return _kind_group(self._finite[0]) if self._finite else None

    def fragment_of(self, v) -> int:
        return fragment_of(self, v)

    def lower(self, i):
        """Exclusive lower boundary of fragment ``i`` (None for -inf)."""
        return None if i == 1 else self.boundaries[i - 2]

    def upper(self, i):
        """Inclusive upper boundary of fragment ``i`` (POS_INF for the last)."""
        return self.boundaries[i - 1]

    # ---------------------------------------------------------- serialization
    def to_json(self) -> dict:
        return {
            "relation": self.relation,
            "attribute": self.attribute,
            "boundaries": [tag_value(u) for u in self.boundaries],
            "labels": list(self.labels),
        }

    @classmethod
    def from_json(cls, d: dict) -> "RangePartition":
        return cls(d["relation"], d["attribute"], tuple(untag_value(u) for u in d["boundaries"]),
                   tuple(d.get("labels", ())))

    @property
    def ref(self) -> str:
        """Stable identity string: ``relation.attribute/n/digest``."""
        body = json.dumps([tag_value(u) for u in self.boundaries], sort_keys=True)
        digest = hashlib.sha1(body.encode()).hexdigest()[:10]
        return f"{self.relation}.{self.attribute}/{self.size}/{digest}"

    def __eq__(self, other):
        return (isinstance(other, RangePartition) and self.relation == other.relation
                and self.attribute == other.attribute and self.boundaries == other.boundaries)

    def __hash__(self):
        return hash((self.relation, self.attribute, self.boundaries))


def tag_value(v):
    if v is POS_INF:
        return {"inf": True}
    if v is None:
        return {"null": True}
    if isinstance(v, str):
        return {"str": v}
    if isinstance(v, Fraction) and v.denominator != 1:
        return {"rat": f"{v.numerator}/{v.denominator}"}
    return {"int": int(v)}


def untag_value(d):
    if "inf" in d:
        return POS_INF
    if "null" in d:
        return None
    if "str" in d:
        return d["str"]
    if "rat" in d:
        return Fraction(d["rat"])
    return int(d["int"])


def fragment_of(p: RangePartition, v) -> int:
    """1-based fragment index of ``v`` by binary search over the boundaries."""
    if v is None:
        raise PartitionError("null has no fragment")
    kind = p.value_kind
    if kind is not None and _kind_group(v) != kind:
        raise PartitionError(f"value {v!r} is not comparable with partition on {p.attribute}")
    return bisect_left(p._finite, v) + 1


def fragment_of_linear(p: RangePartition, v) -> int:
    """Reference implementation by linear scan (test oracle)."""
    for i, u in enumerate(p.boundaries, start=1):
        if v <= u if u is not POS_INF else True:
            return i
    raise AssertionError("unreachable")


def fragment_rows(p: RangePartition, r: Relation) -> list:
    """Row-id sets per fragment (index 0 holds fragment 1)."""
    pos = r.schema.position(p.attribute)
    out = [set() for _ in range(p.size)]
    for row, rid in zip(r.rows, r.ids):
        out[fragment_of(p, row[pos]) - 1].add(rid)
    return out


def fragment_vector(p: RangePartition, r: Relation) -> list:
    """Fragment index (1-based) for each row of ``r`` in row order."""
    pos = r.schema.position(p.attribute)
    finite = p._finite
    kind = p.value_kind
    out = []
    for row in r.rows:
        v = row[pos]
        if v is None or (kind is not None and _kind_group(v) != kind):
            raise PartitionError(f"value {v!r} has no fragment")
        out.append(bisect_left(finite, v) + 1)
    return out


# ---------------------------------------------------------------- statistics

@dataclass(frozen=True)
class ColumnStats:
    relation: str
    attribute: str
    kind: str
    values: tuple  # full sorted column, nulls removed
    nulls: int = 0

    @property
    def min(self):
        return self.values[0] if self.values else None

    @property
    def max(self):
        return self.values[-1] if self.values else None

    @property
    def distinct(self) -> int:
        return len(set(self.values))

    def __len__(self):
        return len(self.values)


@dataclass
class Stats:
    schemas: dict
    columns: dict  # (relation, attribute) -> ColumnStats

    @classmethod
    def from_db(cls, db: dict) -> "Stats":
        cols = {}
        for name, rel in db.items():
            for i, (a, k) in enumerate(rel.schema.attrs):
                vals = sorted(r[i] for r in rel.rows if r[i] is not None)
                cols[(name, a)] = ColumnStats(name, a, k, tuple(vals), len(rel.rows) - len(vals))
        return cls({n: r.schema for n, r in db.items()}, cols)

    def column(self, relation, attribute) -> ColumnStats:
        try:
            return self.columns[(relation, attribute)]
        except KeyError:
            raise PartitionError(f"no statistics for {relation}.{attribute}") from None

    def has_nulls(self, relation) -> bool:
        return any(c.nulls for (r, _), c in self.columns.items() if r == relation)

    def bounds(self, relation, attribute):
        c = self.columns.get((relation, attribute))
        if c is None or not c.values:
            return None
        return c.min, c.max


def build_equi_depth(stats: ColumnStats, k: int) -> RangePartition:
    """Equi-depth partition with at most ``k`` fragments.

    Boundary ``i`` (``0 < i < k``) is the ``floor(i*N/k)``-th smallest value, so
    fragment sizes differ by at most one on distinct data.  Repeated
    boundaries collapse.  With fewer than ``k`` distinct values every distinct
    value gets its own fragment.
    """
    if k < 1:
        raise PartitionError("k must be at least 1")
    vals = list(stats.values)
    if not vals:
        raise PartitionError(f"empty statistics for {stats.relation}.{stats.attribute}")
    distinct = sorted(set(vals))
    if len(distinct) < k:
        bounds = distinct[:-1]
    else:
        n = len(vals)
        bounds = []
        for i in range(1, k):
            b = vals[i * n // k - 1]
            if not bounds or bounds[-1] < b:
                bounds.append(b)
    return RangePartition(stats.relation, stats.attribute, tuple(bounds))


def value_from_text(text: str, kind: str):
    if kind == "str":
        return text
    try:
        if kind == "int":
            return int(text)
        v = Fraction(text)
        return int(v) if v.denominator == 1 else v
    except ValueError:
        raise PartitionError(f"cannot read {text!r} as {kind}") from None


def kind_matches(v, kind: str) -> bool:
    vk = kind_of_value(v)
    return (vk == "str") == (kind == "str")
