import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from pbds import logic as L
from pbds.errors import LogicTypeError
from pbds.experiments import FormulaGen, prover_suite
from pbds.fixtures import REUSE_TEMPLATE_TEXT
from pbds.logic import FALSE, TRUE, SVar, cmp, is_valid, land, lnot, lor

x, y = L.var("x"), L.var("y")


def test_equality_chain_fixture():
    premise = land(cmp("=", "a", "a'"), cmp("=", "a'", 40), cmp(">", "a'", 10))
    conclusion = land(cmp("=", "a", 40), cmp(">", "a", 30))
    assert is_valid(premise, conclusion).status == "Valid"
    grid = {"a": range(0, 101), "a'": range(0, 101)}
    assert L.grid_validity_oracle(premise, conclusion, grid)


def test_strict_implies_weak():
    assert is_valid(cmp(">", x, 0), cmp(">=", x, 0), {"x": "int"}).status == "Valid"


def test_counterexample_on_integers():
    v = is_valid(cmp(">", x, 0), cmp(">", x, 1), {"x": "int"})
    assert v.status == "NotValid"
    assert v.counterexample == {"x": 1}
    assert str(v) == "NotValid(x=1)"


def test_counterexample_on_rationals_is_verified():
    v = is_valid(cmp(">", x, 0), cmp(">", x, 1))
    assert v.status == "NotValid"
    c = v.counterexample["x"]
    assert 0 < c <= 1


def test_difference_constraints():
    p = land(cmp("<=", x - y, 2), cmp("<=", y, 5))
    assert is_valid(p, cmp("<=", x, 7)).valid
    assert not is_valid(p, cmp("<=", x, 6)).valid


def test_constants():
    assert is_valid(FALSE, cmp("=", x, 3)).valid
    assert is_valid(cmp("=", x, 3), TRUE).valid
    assert is_valid(TRUE, TRUE).valid
    assert is_valid(TRUE, FALSE).status == "NotValid"


def test_string_atoms():
    s, t = SVar("s"), SVar("t")
    assert is_valid(cmp("=", s, "CA"), cmp("<=", s, "MI")).valid
    assert is_valid(land(cmp("=", s, t), cmp("=", t, "NY")), cmp("=", s, "NY")).valid
    v = is_valid(cmp("<", s, "MI"), cmp("<", s, "CA"))
    assert v.status == "NotValid"
    assert "CA" <= v.counterexample["s"] < "MI"


def test_mixing_kinds_is_an_error():
    with pytest.raises(LogicTypeError):
        is_valid(cmp("=", SVar("x"), "a"), TRUE, {"x": "int"})


def test_dnf_guard_returns_unknown():
    # (x1=0 | x1=1) & ... over 15 variables has 2^15 conjuncts after negation
    clauses = [lor(cmp("=", f"v{i}", 0), cmp("=", f"v{i}", 1)) for i in range(15)]
    premise = land(*clauses)
    conclusion = lnot(land(*clauses))
    v = is_valid(lnot(premise), conclusion)
    assert v.status == "Unknown" and "DNF" in v.reason


def test_sexpr_rendering():
    f = land(cmp("<=", x - y, 2), lnot(cmp("=", SVar("s"), "a")))
    text = L.to_sexpr(f)
    assert text.startswith("(and ")
    assert "(not " in text


def test_prime_renames_every_variable():
    f = land(cmp("<", "a", "b"), cmp("=", SVar("s"), "z"))
    assert L.formula_vars(L.prime(f)) == {"a'", "b'", "s'"}


# ------------------------------------------------------------- grid oracle

def test_grid_oracle_examples():
    p = cmp(">", x, 0)
    assert L.grid_validity_oracle(p, p, {"x": [-1, 0, 1]})
    assert not L.grid_validity_oracle(TRUE, cmp("=", x, 0), {"x": [0, 1]})


def test_grid_oracle_on_reuse_conditions():
    # incoming instance (100, 15) primed, captured instance (100, 10) unprimed
    assert "$2" in REUSE_TEMPLATE_TEXT
    premise = land(cmp("=", "cnt", "cnt'"), cmp("=", "popden", "popden'"),
                   cmp(">", "popden'", 100), cmp(">", "cnt'", 15))
    conclusion = land(cmp(">", "popden", 100), cmp(">", "cnt", 10))
    grid = {"cnt": range(0, 30), "cnt'": range(0, 30),
            "popden": range(80, 120), "popden'": range(80, 120)}
    assert L.grid_validity_oracle(premise, conclusion, grid)
    assert is_valid(premise, conclusion).valid
    swapped = land(cmp("=", "cnt", "cnt'"), cmp(">", "cnt'", 10))
    assert not L.grid_validity_oracle(swapped, cmp(">", "cnt", 15), grid)


def test_vectorized_oracle_matches_scalar():
    rng = random.Random(5)
    for _ in range(100):
        g = FormulaGen(rng)
        p, c = g.formula(), g.formula(1)
        grid = g.grid()
        names = sorted(grid)
        assert (L.grid_validity_oracle(p, c, grid)
                == L._grid_scalar(p, c, grid, names)), (L.to_sexpr(p), L.to_sexpr(c))


@given(st.integers(-20, 20), st.integers(-20, 20), st.sampled_from(L.OPS), st.sampled_from(L.OPS))
def test_single_variable_bounds_match_grid(a, b, op1, op2):
    p, c = cmp(op1, x, a), cmp(op2, x, b)
    v = is_valid(p, c, {"x": "int"})
    truth = L.grid_validity_oracle(p, c, {"x": range(-45, 46)})
    if v.status == "Valid":
        assert truth
    elif v.status == "NotValid":
        assert not truth
        n = v.counterexample["x"]
        assert L.evaluate(p, {"x": n}) and not L.evaluate(c, {"x": n})


def test_rational_variables_need_fractional_witnesses():
    # no integer strictly between 0 and 1, but a rational exists
    p = land(cmp(">", x, 0), cmp("<", x, 1))
    assert is_valid(p, FALSE, {"x": "int"}).status != "NotValid"
    v = is_valid(p, FALSE, {"x": "rat"})
    assert v.status == "NotValid" and v.counterexample["x"] == Fraction(1, 2)


def test_prover_suite_small():
    res = prover_suite(1500, seed=9)
    assert res.violations == 0, res.examples
    assert res.counts["Valid"] > 100 and res.counts["NotValid"] > 100
