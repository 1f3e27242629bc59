"""Bit-vector provenance sketches over range partitions.

Bit ``i`` (1-based) lives in word ``(i-1) // 64`` at bit ``(i-1) % 64``.  For
printing, bit 1 is the leftmost character, so the singleton for fragment 1 of a
four-fragment partition prints as ``1000``.
"""
from __future__ import annotations

import numpy as np

from .errors import SketchError
from .evaluate import eval_plan, eval_with_lineage
from .partition import RangePartition, fragment_vector
from .plan import scanned
from .relation import Relation

WORD = 64
_ONE = np.uint64(1)


def _nwords(n):
    return (n + WORD - 1) // WORD


def _tail_mask(n):
    r = n % WORD
    return np.uint64((1 << r) - 1) if r else np.uint64(0xFFFFFFFFFFFFFFFF)


class BitSketch:
    """Immutable set of fragments of one partition."""

    __slots__ = ("partition", "words")

    def __init__(self, partition: RangePartition, words: np.ndarray):
        if words.dtype != np.uint64 or words.shape != (_nwords(partition.size),):
            raise SketchError("word array does not match partition size")
        words.flags.writeable = False
        self.partition = partition
        self.words = words

    # ---------------------------------------------------------- constructors
    @classmethod
    def zeros(cls, partition):
        return cls(partition, np.zeros(_nwords(partition.size), dtype=np.uint64))

    @classmethod
    def ones(cls, partition):
        w = np.full(_nwords(partition.size), 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
        w[-1] &= _tail_mask(partition.size)
        return cls(partition, w)

    @classmethod
    def from_indices(cls, partition, indices):
        acc = SketchAccumulator(partition)
        for i in indices:
            acc.add_index(i)
        return acc.freeze()

    @classmethod
    def from_binary(cls, partition, text: str):
        if len(text) != partition.size or set(text) - {"0", "1"}:
            raise SketchError(f"expected {partition.size} binary digits, got {text!r}")
        return cls.from_indices(partition, [i + 1 for i, c in enumerate(text) if c == "1"])

    @classmethod
    def from_hex(cls, partition, text: str):
        value = int(text, 16)
        n = partition.size
        if value >> n:
            raise SketchError(f"hex value {text} has more than {n} bits")
        return cls.from_binary(partition, format(value, f"0{n}b"))

    # --------------------------------------------------------------- queries
    @property
    def n(self) -> int:
        return self.partition.size

    def is_set(self, i: int) -> bool:
        if not 1 <= i <= self.n:
            raise SketchError(f"fragment {i} out of range 1..{self.n}")
        j = i - 1
        return bool((int(self.words[j // WORD]) >> (j % WORD)) & 1)

    def indices(self) -> list:
        out = []
        for wi, w in enumerate(self.words):
            w = int(w)
            while w:
                low = w & -w
                out.append(wi * WORD + low.bit_length())
                w ^= low
        return out

    def count(self) -> int:
        return sum(int(w).bit_count() for w in self.words)

    def is_empty(self) -> bool:
        return not self.words.any()

    def is_full(self) -> bool:
        return self == BitSketch.ones(self.partition)

    def to_binary(self) -> str:
        bits = ["0"] * self.n
        for i in self.indices():
            bits[i - 1] = "1"
        return "".join(bits)

    def to_hex(self) -> str:
        return hex(int(self.to_binary(), 2))

    @property
    def nbytes(self) -> int:
        return self.words.nbytes

    def issubset(self, other: "BitSketch") -> bool:
        _same_partition(self, other)
        return not np.any(self.words & ~other.words)

    def __or__(self, other):
        return bitor(self, other)

    def __eq__(self, other):
        return (isinstance(other, BitSketch) and self.partition == other.partition
                and np.array_equal(self.words, other.words))

    def __hash__(self):
        return hash((self.partition, self.words.tobytes()))

    def __repr__(self):
        return f"BitSketch({self.partition.relation}.{self.partition.attribute}, {self.to_binary()})"


class SketchAccumulator:
    """Mutable bit vector used while folding annotations; owned by one caller."""

    __slots__ = ("partition", "words")

    def __init__(self, partition):
        self.partition = partition
        self.words = np.zeros(_nwords(partition.size), dtype=np.uint64)

    def add_index(self, i: int):
        if not 1 <= i <= self.partition.size:
            raise SketchError(f"fragment {i} out of range 1..{self.partition.size}")
        j = i - 1
        self.words[j // WORD] |= _ONE << np.uint64(j % WORD)

    def add_sketch(self, s: BitSketch):
        np.bitwise_or(self.words, s.words, out=self.words)

    def freeze(self) -> BitSketch:
        w = self.words
        self.words = None  # ownership moves to the sketch; no copy
        return BitSketch(self.partition, w)


def _same_partition(a, b):
    if a.partition != b.partition:
        raise SketchError("sketches are over different partitions")


def singleton(partition, i: int) -> BitSketch:
    acc = SketchAccumulator(partition)
    acc.add_index(i)
    return acc.freeze()


def bitor(a: BitSketch, b: BitSketch) -> BitSketch:
    _same_partition(a, b)
    out = np.empty_like(a.words)
    np.bitwise_or(a.words, b.words, out=out)
    return BitSketch(a.partition, out)


class SketchSet(dict):
    """Relation name -> BitSketch, at most one sketch per relation."""

    def __init__(self, items=()):
        super().__init__()
        pairs = items.items() if isinstance(items, dict) else items
        for k, v in pairs:
            self[k] = v

    def __setitem__(self, rel, sketch):
        if sketch.partition.relation != rel:
            raise SketchError(f"sketch over {sketch.partition.relation} filed under {rel}")
        super().__setitem__(rel, sketch)

    @classmethod
    def of(cls, *sketches):
        s = cls()
        for sk in sketches:
            if sk.partition.relation in s:
                raise SketchError(f"two sketches for relation {sk.partition.relation}")
            s[sk.partition.relation] = sk
        return s


# ----------------------------------------------------------------- oracles

def accurate_sketch(plan, db: dict, partition: RangePartition) -> BitSketch:
    """Fragments that contain at least one lineage row of the whole query."""
    if partition.relation not in scanned(plan):
        raise SketchError(f"relation {partition.relation} is not accessed by the plan")
    _, lineage = eval_with_lineage(plan, db)
    rel = db[partition.relation]
    frag = dict(zip(rel.ids, fragment_vector(partition, rel)))
    acc = SketchAccumulator(partition)
    seen = set()
    for lin in lineage:
        for r, rid in lin:
            if r == partition.relation and rid not in seen:
                seen.add(rid)
                acc.add_index(frag[rid])
    return acc.freeze()


def restrict_relation(rel: Relation, sketch: BitSketch, frags=None) -> Relation:
    frags = frags if frags is not None else fragment_vector(sketch.partition, rel)
    keep = set(sketch.indices())
    pairs = [(r, i) for r, i, f in zip(rel.rows, rel.ids, frags) if f in keep]
    return Relation(rel.schema, tuple(r for r, _ in pairs), tuple(i for _, i in pairs))


def instance(sketchset: dict, db: dict) -> dict:
    """Sub-database keeping only rows in included fragments of sketched relations."""
    out = dict(db)
    for rel, sk in sketchset.items():
        if rel not in db:
            raise SketchError(f"sketch references unknown relation {rel}")
        out[rel] = restrict_relation(db[rel], sk)
    return out


def empirically_safe(plan, db: dict, sketchset: dict) -> bool:
    full = eval_plan(plan, db)
    sub = eval_plan(plan, instance(sketchset, db))
    return full.bag() == sub.bag()
