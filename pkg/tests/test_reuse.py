import random

import pytest

from pbds.capture import capture
from pbds.catalog import CatalogEntry
from pbds.errors import ReuseError
from pbds.evaluate import eval_plan, whole_lineage
from pbds.experiments import reuse_suite
from pbds.parser import parse_query
from pbds.partition import Stats
from pbds.randgen import PlanGen, random_binding, random_db
from pbds.reuse import Template, check_reusable, find_reusable, instantiate, template_id
from pbds.sketch import BitSketch, SketchSet, empirically_safe


@pytest.fixture
def t(reuse_text):
    return Template.parse(reuse_text)


def test_instantiate_example(t):
    q = instantiate(t, (100, 10))
    assert q == parse_query(
        "select(cnt > 10, agg([state], count(*) as cnt, select(popden > 100, scan(cities))))")
    assert instantiate(t, (100, 15)) != q


def test_zero_parameter_template(q2):
    t = Template.of(q2)
    assert t.arity == 0 and instantiate(t, ()) == q2


def test_arity_and_unused_parameter_errors(t):
    with pytest.raises(ReuseError):
        instantiate(t, (100,))
    with pytest.raises(ReuseError):
        Template.parse("select(popden > $2, scan(cities))")


def test_template_id_ignores_bindings_but_not_constants(t):
    assert Template.parse(t.text).id == t.id
    other = Template.parse(t.text.replace("count(*)", "count(popden)"))
    assert other.id != t.id
    assert template_id(parse_query("select(popden > 1, scan(cities))")) != \
        template_id(parse_query("select(popden > 2, scan(cities))"))


def test_example_bindings(t, stats):
    assert check_reusable(t, (100, 10), (100, 15), stats).verdict == "Reusable"
    back = check_reusable(t, (100, 15), (100, 10), stats)
    assert back.verdict == "Unknown"
    assert any(o.verdict.status == "NotValid" for o in back.obligations)


def test_identical_bindings_are_reusable(t, q2, stats):
    for b in ((100, 10), (0, 0), (5000, 1)):
        assert check_reusable(t, b, b, stats).reusable
    assert check_reusable(Template.of(q2), (), (), stats).reusable


def test_example_is_empirically_sound(t, db, fstate, stats):
    q, q_new = instantiate(t, (100, 0)), instantiate(t, (100, 1))
    assert check_reusable(t, (100, 0), (100, 1), stats).reusable
    assert whole_lineage(q_new, db) <= whole_lineage(q, db)
    assert empirically_safe(q_new, db, capture(q, db, fstate))
    assert eval_plan(q_new, db).rows == (("CA", 2), ("NY", 2), ("TX", 2))


def test_inner_filter_direction(t, stats):
    # a tighter popden cut only shrinks counts, so surviving groups survived before
    # (cuts inside the popden range 2000..7000; outside it both filters are no-ops)
    assert check_reusable(t, (3000, 1), (5000, 1), stats).reusable
    # a looser cut can lift counts over the threshold for groups Q dropped
    assert not check_reusable(t, (5000, 1), (3000, 1), stats).reusable
    assert check_reusable(t, (100, 10), (200, 10), stats).reusable
    assert check_reusable(t, (200, 10), (100, 10), stats).reusable


def test_bindings_must_match_kinds(t, stats):
    with pytest.raises(ReuseError):
        check_reusable(t, (100, 10), ("x", 10), stats)
    with pytest.raises(ReuseError):
        check_reusable(t, (100, 10), (100,), stats)


def test_explain_text(t, stats):
    text = check_reusable(t, (100, 10), (100, 15), stats).explain()
    assert text.startswith("verdict: Reusable") and "uconds" in text


# ---------------------------------------------------------------- lookup

def _entry(t, binding, sketch, n):
    return CatalogEntry(f"ps{n}", t.id, t.text, binding, ("cities.state",), SketchSet.of(sketch), True)


def test_find_reusable(t, stats, fstate):
    e1 = _entry(t, (100, 10), BitSketch.from_indices(fstate, [1, 3, 4]), 1)
    assert find_reusable([e1], t, (100, 15), stats) is e1
    assert find_reusable([], t, (100, 15), stats) is None
    assert find_reusable([e1], t, (100, 5), stats) is None


def test_find_reusable_prefers_tightest(t, stats, fstate):
    wide = _entry(t, (100, 10), BitSketch.from_indices(fstate, [1, 3, 4]), 1)
    tight = _entry(t, (100, 12), BitSketch.from_indices(fstate, [1]), 2)
    assert find_reusable([wide, tight], t, (100, 15), stats) is tight
    assert find_reusable([tight, wide], t, (100, 15), stats) is tight


def test_find_reusable_skips_other_templates_and_unsafe_entries(t, q2, stats, fstate):
    s = BitSketch.from_indices(fstate, [1])
    foreign = CatalogEntry("ps1", Template.of(q2).id, "x", (100, 10), (), SketchSet.of(s), True)
    unsafe = _entry(t, (100, 10), s, 2)
    unsafe.safe = False
    assert find_reusable([foreign, unsafe], t, (100, 15), stats) is None


# ---------------------------------------------------------- randomized

def test_reflexivity_on_random_templates():
    rng = random.Random(61)
    total = ok = 0
    for _ in range(200):
        db = random_db(rng, 16)
        stats = Stats.from_db(db)
        gen = PlanGen(rng, stats.schemas, params=True)
        t = Template.of(gen.template())
        b = random_binding(rng, gen.param_kinds)
        total += 1
        ok += check_reusable(t, b, b, stats).reusable
    # reflexivity is only promised where the prover can discharge everything
    assert ok > total // 2


def test_reuse_soundness_small_suite():
    res = reuse_suite(200, seed=62)
    assert res.violations == 0, res.examples
