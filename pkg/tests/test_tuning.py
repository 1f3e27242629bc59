import json
import math
from fractions import Fraction

import pytest

from pbds.evaluate import eval_plan
from pbds.partition import Stats
from pbds.reuse import Template, check_reusable, instantiate
from pbds.tuning import (
    NO_PS, ParamSpec, Policy, TemplateSpec, TunerState, WorkloadSpec, generate_workload,
    optimal_intervals, optimal_option, simulate, step, synthetic_db, synthetic_spec,
)

POPDEN_TEMPLATE = "select(popden > $1, scan(cities))"


def two_template_spec(seed=7, queries=10):
    return WorkloadSpec((
        TemplateSpec(POPDEN_TEMPLATE, (ParamSpec("normal", 4000, 800, 100),), 2.0),
        TemplateSpec("select(state = $1, scan(cities))", (ParamSpec("const", value="CA"),), 1.0),
    ), queries, seed)


def test_workload_is_deterministic():
    a = generate_workload(two_template_spec())
    assert a == generate_workload(two_template_spec())
    assert len(a) == 10
    assert len({tid for tid, _ in generate_workload(two_template_spec(queries=40))}) == 2
    assert generate_workload(two_template_spec(seed=8)) != a


def test_interval_parameter():
    spec = WorkloadSpec((TemplateSpec("select(popden >= $1 AND popden < $2, scan(cities))",
                                      (ParamSpec("normal", 100), ParamSpec("offset", 50, base=1))),), 3)
    assert generate_workload(spec) == [(Template.parse(spec.templates[0].text).id, (100, 150))] * 3


def test_single_template_workload():
    spec = WorkloadSpec((TemplateSpec(POPDEN_TEMPLATE, (ParamSpec("normal", 4000, 500),)),), 20, 3)
    assert {tid for tid, _ in generate_workload(spec)} == {Template.parse(POPDEN_TEMPLATE).id}


def test_workload_spec_validation():
    with pytest.raises(ValueError):
        ParamSpec("normal", 0, -1)
    with pytest.raises(ValueError):
        TemplateSpec("scan(cities)", (), 0)
    with pytest.raises(ValueError):
        Policy(selectivity_threshold=0)
    with pytest.raises(ValueError):
        Policy(strategy="lazy")


def test_workload_spec_from_json():
    d = {"templates": [{"text": POPDEN_TEMPLATE, "params": [{"mean": 3000, "stddev": 10}]}],
         "queries": 5, "seed": 2}
    spec = WorkloadSpec.from_json(d)
    assert spec.queries == 5 and spec.templates[0].params[0].mean == 3000


# -------------------------------------------------------------------- step

@pytest.fixture
def tuner(db):
    return TunerState(db, Policy(fragments=4))


def test_high_estimate_runs_plain(tuner, reuse_text):
    t = Template.parse(reuse_text)
    tuner.realized[t.id].append(0.80)
    d = step(tuner, t, (3000, 1))
    assert d.mode == "plain" and d.estimate == pytest.approx(0.80)
    assert tuner.misses == {}


def test_third_miss_captures_then_reuse(tuner, db, reuse_text):
    t = Template.parse(reuse_text)
    modes = [step(tuner, t, (3000, 1)).mode for _ in range(3)]
    assert modes == ["plain", "plain", "capture"]
    assert len(tuner.catalog.entries) == 1
    d = step(tuner, t, (3000, 2))
    assert d.mode == "reuse" and d.entry_id == tuner.catalog.entries[0].id
    assert d.result.bag() == eval_plan(instantiate(t, (3000, 2)), db).bag()


def test_catalog_hit_for_the_example_bindings(tuner, db, reuse_text):
    t = Template.parse(reuse_text)
    for _ in range(3):
        step(tuner, t, (100, 10))
    d = step(tuner, t, (100, 15))
    assert d.mode == "reuse"
    assert d.result.bag() == eval_plan(instantiate(t, (100, 15)), db).bag()


def test_eager_captures_on_first_miss(db, reuse_text):
    state = TunerState(db, Policy(strategy="eager", fragments=4))
    assert step(state, Template.parse(reuse_text), (3000, 1)).mode == "capture"


def test_plain_strategy_never_captures(db, reuse_text):
    state = TunerState(db, Policy(strategy="plain"))
    t = Template.parse(reuse_text)
    assert {step(state, t, (3000, 1)).mode for _ in range(5)} == {"plain"}


def test_template_without_safe_attributes_stays_plain(db, caplog):
    state = TunerState(db, Policy(fragments=4))
    t = Template.parse("select(total < $1, agg([], sum(popden) as total, scan(cities)))")
    assert state.safe_attrs(t) is None
    assert {step(state, t, (90000,)).mode for _ in range(5)} == {"plain"}
    assert sum("no safe attribute" in r.message for r in caplog.records) == 1


# ----------------------------------------------------------- cost model

def test_optimal_option_examples():
    cap, use = {"ps": 12}, {"ps": 1}
    assert optimal_option(10, cap, use, 1) == NO_PS
    assert optimal_option(10, cap, use, 2) == "ps"
    assert optimal_option(10, cap, use, 0) == NO_PS


def test_ties_go_to_no_ps():
    assert optimal_option(10, {"ps": 10}, {"ps": 5}, 2) == NO_PS


def test_q10_row_break_even_points():
    # per-run costs chosen so the three crossovers sit at 2, 46 and 667
    c_nops = Fraction(100)
    use = {4000: Fraction(10), 10000: Fraction(9), 100000: Fraction(89, 10)}
    cap = {4000: Fraction(100), 10000: Fraction(291, 2), 100000: Fraction(21215, 100)}
    rows = optimal_intervals(c_nops, cap, use)
    assert rows == [(NO_PS, 1, 2), (4000, 2, 46), (10000, 46, 667), (100000, 667, None)]
    for option, lo, hi in rows:
        for n in (lo, (hi or lo + 50) - 1):
            assert optimal_option(c_nops, cap, use, n) == option


def test_optimal_intervals_match_brute_force():
    import random
    rng = random.Random(71)
    for _ in range(200):
        c = rng.randint(5, 50)
        sizes = rng.sample([4, 8, 16, 32], rng.randint(1, 3))
        cap = {s: rng.randint(1, 200) for s in sizes}
        use = {s: rng.randint(1, c) for s in sizes}
        rows = optimal_intervals(c, cap, use)
        assert rows[0][1] == 1 and rows[-1][2] is None
        top = rows[-1][1] + 20
        for n in range(1, top):
            want = optimal_option(c, cap, use, n)
            got = next(o for o, lo, hi in rows if lo <= n and (hi is None or n < hi))
            assert got == want


# ------------------------------------------------------------- simulation

@pytest.fixture(scope="module")
def small_run():
    db = synthetic_db(5_000, seed=3)
    spec = synthetic_spec(60, seed=4)
    templates = spec.compiled()
    return db, templates, generate_workload(spec)


def test_ledger_conservation(small_run):
    db, templates, work = small_run
    rep = simulate(db, templates, work, Policy(fragments=200))
    led = rep.ledger
    assert math.isclose(led.total(), sum(e.cost for e in led.entries))
    assert math.isclose(led.total(), led.c_plain + led.c_cap + led.c_use)
    assert led.cumulative()[-1] == pytest.approx(led.total())


def test_replay_is_byte_identical(small_run):
    db, templates, work = small_run
    a = simulate(db, templates, work, Policy(fragments=200)).to_json()
    b = simulate(db, templates, work, Policy(fragments=200)).to_json()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_adaptive_scans_no_more_rows_than_plain(small_run):
    db, templates, work = small_run
    rep = simulate(db, templates, work, Policy(fragments=200))
    plain = simulate(db, templates, work, Policy(strategy="plain"))
    assert rep.ledger.first("reuse") is not None
    assert rep.ledger.rows_scanned() <= plain.ledger.rows_scanned()
    assert rep.total < rep.plain_total


def test_reuse_only_with_safe_and_reusable_sketches(small_run):
    db, templates, work = small_run
    state = TunerState(db, Policy(fragments=200))
    stats = Stats.from_db(db)
    reused = 0
    for tid, b in work:
        d = step(state, templates[tid], b)
        if d.mode == "reuse":
            reused += 1
            e = state.catalog.get(d.entry_id)
            assert e.safe
            assert check_reusable(templates[tid], e.binding, b, stats).reusable
            assert d.result.bag() == eval_plan(instantiate(templates[tid], b), db).bag()
    assert reused > 0
