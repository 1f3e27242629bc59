import itertools
import random

import pytest
from hypothesis import given, strategies as st

from pbds.errors import SketchError
from pbds.evaluate import whole_lineage
from pbds.parser import parse_query
from pbds.partition import RangePartition, fragment_rows
from pbds.randgen import PlanGen, random_db, random_partition
from pbds.sketch import (
    BitSketch, SketchSet, accurate_sketch, bitor, empirically_safe, instance, singleton,
)


def test_singletons(fstate):
    assert singleton(fstate, 1).to_binary() == "1000"
    assert singleton(fstate, 3).to_binary() == "0010"
    assert singleton(RangePartition("R", "a", ()), 1).to_binary() == "1"
    with pytest.raises(SketchError):
        singleton(fstate, 5)


def test_bitor_fixture(fstate):
    a, b = singleton(fstate, 1), singleton(fstate, 3)
    assert bitor(a, b).to_binary() == "1010"
    assert bitor(a, a) == a
    assert bitor(BitSketch.zeros(fstate), b) == b


def test_bitor_needs_same_partition(fstate, fpopden):
    with pytest.raises(SketchError):
        bitor(singleton(fstate, 1), singleton(fpopden, 1))


def test_hex_printing(fstate):
    assert singleton(fstate, 1).to_hex() == "0x8"
    assert BitSketch.from_binary(fstate, "1010").to_hex() == "0xa"


def test_accurate_sketches(db, q2, fstate, fpopden):
    assert accurate_sketch(q2, db, fstate).to_binary() == "1000"
    assert accurate_sketch(q2, db, fpopden).to_binary() == "01"
    empty = {"cities": db["cities"].without(db["cities"].ids)}
    assert accurate_sketch(q2, empty, fstate).is_empty()


def test_instances(db, fstate, fpopden):
    inst = instance(SketchSet.of(singleton(fstate, 1)), db)
    assert inst["cities"].ids == ("t1", "t2", "t3")
    inst = instance(SketchSet.of(singleton(fpopden, 2)), db)
    assert inst["cities"].ids == ("t1", "t2", "t3", "t4")
    assert instance(SketchSet.of(BitSketch.ones(fstate)), db)["cities"] == db["cities"]


def test_empirical_safety_fixtures(db, q2, fstate, fpopden):
    from pbds.evaluate import eval_plan
    assert empirically_safe(q2, db, SketchSet.of(singleton(fstate, 1)))
    g2 = SketchSet.of(singleton(fpopden, 2))
    assert not empirically_safe(q2, db, g2)
    assert eval_plan(q2, instance(g2, db)).rows == (("NY", 7000),)
    assert empirically_safe(q2, db, SketchSet.of(BitSketch.ones(fstate)))


def test_sketch_set_rules(fstate):
    s = singleton(fstate, 1)
    with pytest.raises(SketchError):
        SketchSet.of(s, s)
    with pytest.raises(SketchError):
        SketchSet({"other": s})


def test_accurate_sketch_needs_scanned_relation(db):
    with pytest.raises(SketchError):
        accurate_sketch(parse_query("scan(cities)"), db, RangePartition("R", "a", (1,)))


# ---------------------------------------------------------- algebra laws

def _all_sketches(p):
    return [BitSketch.from_indices(p, [i + 1 for i in range(p.size) if m >> i & 1])
            for m in range(1 << p.size)]


def test_bitor_laws_exhaustive_on_three_fragments():
    p = RangePartition("R", "a", (1, 2))
    every = _all_sketches(p)
    zero = BitSketch.zeros(p)
    for a in every:
        assert a | zero == a and a | a == a
        for b in every:
            assert a | b == b | a
            for c in every:
                assert (a | b) | c == a | (b | c)


sizes = st.integers(1, 300)


@st.composite
def sketch_triples(draw):
    n = draw(sizes)
    p = RangePartition("R", "a", tuple(range(1, n)))
    idx = st.sets(st.integers(1, n))
    return tuple(BitSketch.from_indices(p, draw(idx)) for _ in range(3))


@given(sketch_triples())
def test_bitor_laws_random(t):
    a, b, c = t
    assert a | b == b | a
    assert (a | b) | c == a | (b | c)
    assert a | a == a
    assert set((a | b).indices()) == set(a.indices()) | set(b.indices())


@given(sketch_triples())
def test_hex_and_binary_round_trip(t):
    for s in t:
        assert BitSketch.from_hex(s.partition, s.to_hex()) == s
        assert BitSketch.from_binary(s.partition, s.to_binary()) == s


def test_word_packing():
    for n in (1, 63, 64, 65, 1000, 100_000):
        p = RangePartition("R", "a", tuple(range(1, n)))
        assert BitSketch.ones(p).nbytes == -(-n // 64) * 8
        assert BitSketch.ones(p).count() == n


def test_sketch_storage_at_100000_fragments_is_a_few_hundred_bytes():
    # Stated target; 100000 uncompressed bits need 12500 bytes, so this cannot hold.
    p = RangePartition("R", "a", tuple(range(1, 100_000)))
    size = int(BitSketch.ones(p).nbytes)
    assert size <= 500, f"{size} bytes"


# ------------------------------------------------ randomized invariants

def _cases(n, seed):
    rng = random.Random(seed)
    for _ in range(n):
        db = random_db(rng, 24)
        p = PlanGen(rng, {k: r.schema for k, r in db.items()}).plan()
        rel = rng.choice(sorted({s.relation for s in _scans(p)}))
        part = random_partition(rng, db[rel], rng.choice(db[rel].schema.names))
        yield rng, db, p, part


def _scans(p):
    from pbds.plan import Scan, walk
    return [n for n in walk(p) if isinstance(n, Scan)]


def test_superset_chain():
    for _, db, p, part in _cases(400, 21):
        rel = db[part.relation]
        lin = {rid for r, rid in whole_lineage(p, db) if r == part.relation}
        kept = set(instance(SketchSet.of(accurate_sketch(p, db, part)), db)[part.relation].ids)
        assert lin <= kept <= set(rel.ids)


def test_accurate_sketch_is_minimal():
    for _, db, p, part in _cases(300, 22):
        s = accurate_sketch(p, db, part)
        lin = {rid for r, rid in whole_lineage(p, db) if r == part.relation}
        frs = fragment_rows(part, db[part.relation])
        for i in s.indices():
            assert frs[i - 1] & lin


def test_monotone_closure_without_aggregation_or_topk():
    from pbds.plan import Aggregate, TopK, walk
    checked = 0
    for rng, db, p, part in _cases(500, 23):
        if any(isinstance(n, (Aggregate, TopK)) for n in walk(p)):
            continue
        acc = accurate_sketch(p, db, part)
        if not empirically_safe(p, db, SketchSet.of(acc)):
            continue
        bigger = BitSketch.from_indices(part, set(acc.indices()) | {rng.randint(1, part.size)})
        checked += 1
        assert empirically_safe(p, db, SketchSet.of(bigger))
    assert checked > 50


def test_three_fragment_enumeration_matches_set_union():
    p = RangePartition("R", "a", (1, 2))
    for a, b in itertools.product(_all_sketches(p), repeat=2):
        assert set((a | b).indices()) == set(a.indices()) | set(b.indices())
