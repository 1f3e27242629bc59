import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from pbds.errors import PartitionError
from pbds.partition import (
    POS_INF, ColumnStats, RangePartition, Stats, build_equi_depth, fragment_of, fragment_of_linear,
    fragment_rows,
)
from pbds.relation import Relation


def column(values, kind="int"):
    return ColumnStats("R", "a", kind, tuple(sorted(values)))


def rel(values, kind="int"):
    return Relation.from_rows("R", (("a", kind),), [(v,) for v in values])


def sizes(p, values):
    return [len(s) for s in fragment_rows(p, rel(values))]


def test_equi_depth_one_to_eight():
    p = build_equi_depth(column(range(1, 9)), 4)
    assert p.boundaries == (2, 4, 6, POS_INF)
    assert sizes(p, range(1, 9)) == [2, 2, 2, 2]


def test_equi_depth_single_fragment():
    p = build_equi_depth(column([5, 1, 9]), 1)
    assert p.boundaries == (POS_INF,)
    assert sizes(p, [5, 1, 9]) == [3]


def test_equi_depth_popden_median(db, stats):
    p = build_equi_depth(stats.column("cities", "popden"), 2)
    assert p.finite_boundaries == [3700]
    assert [len(f) for f in fragment_rows(p, db["cities"])] == [3, 4]


def test_equi_depth_few_distinct_values():
    p = build_equi_depth(column([1, 1, 2, 2, 2]), 4)
    assert p.finite_boundaries == [1]


def test_equi_depth_strings(db, stats):
    p = build_equi_depth(stats.column("cities", "state"), 4)
    assert p.finite_boundaries == ["AK", "CA", "NY"]
    assert [len(f) for f in fragment_rows(p, db["cities"])] == [1, 2, 2, 2]


def test_equi_depth_rejects_bad_input():
    with pytest.raises(PartitionError):
        build_equi_depth(column([]), 2)
    with pytest.raises(PartitionError):
        build_equi_depth(column([1]), 0)


def test_fragment_of_state_fixture(fstate):
    assert fragment_of(fstate, "CA") == 1
    assert fragment_of(fstate, "AK") == 1
    assert fragment_of(fstate, "TX") == 4
    assert fragment_of(fstate, "MI") == 2   # upper boundaries are inclusive
    assert fragment_of(fstate, "MJ") == 3


def test_fragment_rows_popden(db, fpopden):
    g1, g2 = fragment_rows(fpopden, db["cities"])
    assert g1 == {"t5", "t6", "t7"}
    assert g2 == {"t1", "t2", "t3", "t4"}


def test_fragment_rows_edge_cases(db):
    p = RangePartition("cities", "popden", ())
    assert fragment_rows(p, db["cities"]) == [set(db["cities"].ids)]
    empty = Relation.from_rows("cities", db["cities"].schema.attrs, [])
    assert fragment_rows(RangePartition("cities", "popden", (10, 20)), empty) == [set(), set(), set()]


def test_partition_validation():
    with pytest.raises(PartitionError):
        RangePartition("R", "a", (3, 1))
    with pytest.raises(PartitionError):
        RangePartition("R", "a", (1, "b"))
    with pytest.raises(PartitionError):
        RangePartition("R", "a", (1, 2), ("only one label",))


def test_json_round_trip(fstate):
    assert RangePartition.from_json(fstate.to_json()) == fstate
    p = RangePartition("R", "a", (Fraction(1, 3), 2))
    assert RangePartition.from_json(p.to_json()) == p


def test_stats_bounds_and_nulls():
    r = Relation.from_rows("R", (("a", "int"), ("b", "int")), [(3, None), (1, 2)])
    s = Stats.from_db({"R": r})
    assert s.bounds("R", "a") == (1, 3)
    assert s.has_nulls("R")
    assert s.column("R", "b").nulls == 1


# ------------------------------------------------------------ properties

values = st.lists(st.integers(-50, 50), min_size=1, max_size=40)


@given(values, st.lists(st.integers(-60, 60), max_size=8, unique=True))
def test_cover_and_disjointness(vals, bounds):
    p = RangePartition("R", "a", tuple(sorted(bounds)))
    r = rel(vals)
    frs = fragment_rows(p, r)
    assert len(frs) == p.size
    assert set().union(*frs) == set(r.ids)
    assert sum(len(f) for f in frs) == len(r.ids)
    for v in vals:
        i = fragment_of(p, v)
        lo, hi = p.lower(i), p.upper(i)
        assert (lo is None or lo < v) and (hi is POS_INF or v <= hi)


def test_binary_search_agrees_with_linear_scan():
    rng = random.Random(3)
    for _ in range(10_000):
        if rng.random() < 0.3:
            pool = ["a", "b", "c", "d", "e", "f", "g", "h"]
            bounds = sorted(rng.sample(pool, rng.randint(0, 6)))
            v = rng.choice(pool + ["", "ab", "zz"])
        else:
            bounds = sorted(rng.sample(range(-100, 100), rng.randint(0, 20)))
            v = rng.choice((rng.randint(-110, 110), Fraction(rng.randint(-220, 220), 2)))
        p = RangePartition("R", "a", tuple(bounds))
        assert fragment_of(p, v) == fragment_of_linear(p, v)


@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=300, unique=True), st.integers(1, 40))
def test_equi_depth_balance_on_distinct_data(vals, k):
    p = build_equi_depth(column(vals), k)
    s = sizes(p, vals)
    assert p.size == min(k, len(vals))
    assert max(s) - min(s) <= 1
