import random

import pytest
from hypothesis import given, settings, strategies as st

from cook2ltl.core import Origin, PrimitiveCall, ReductionPolicy
from cook2ltl.ltl import (TRUE, And, Atom, Finally, FormulaSyntaxError, Globally, LTLError, NonPlanFormula, Not, Or,
                          Until, approximations, depth, evaluate, execution_trace, linearize, parse, render,
                          sequenced_visit, translate)
from cook2ltl.semantic_parser import ConnectiveKind, ConnectiveLink

from ltl_oracle import ATOMS, count_formulas, formulas, holds, random_policy_set, traces

a, b, c = ATOMS


def _pol(*calls):
    return ReductionPolicy("k", tuple(PrimitiveCall(*x) for x in calls), Origin.LLM)


def test_sequenced_visit_shapes():
    assert sequenced_visit([a]) == Finally(a)
    assert render(sequenced_visit([a, b])) == "F(a & F(b))"
    assert render(sequenced_visit([Atom(f"p{i}") for i in range(1, 5)])) == "F(p1 & F(p2 & F(p3 & F(p4))))"
    with pytest.raises(LTLError):
        sequenced_visit([])


def test_identity_action_formula():
    assert render(translate([_pol(("SliceObject", ("tomato",)))])) == "F(SliceObject(tomato))"


def test_wait_rule():
    p = _pol(("ToggleOn", ("stove",)), ("Wait", ("water_boiling",)), ("PickUp", ("eggs",)))
    assert render(translate([p])) == "F(ToggleOn(stove) & F((!PickUp(eggs) U water_boiling) & F(PickUp(eggs))))"
    assert linearize(translate([p])) == list(p.calls)


def test_trailing_wait_is_bare_condition():
    p = _pol(("ToggleOn", ("stove",)), ("Wait", ("melted",)))
    assert render(translate([p])) == "F(ToggleOn(stove) & F(melted))"


def test_before_wait_and_its_note():
    p = _pol(("PickUp", ("pan",)), ("Wait", ("before:melted",)))
    f = translate([p])
    assert render(f) == "F(!melted U PickUp(pan))"
    assert approximations(f) and "before" in approximations(f)[0]
    assert linearize(f) == list(p.calls)
    with pytest.raises(LTLError):
        translate([_pol(("Wait", ("before:melted",)))])


def test_or_and_not_links():
    x, y = _pol(("PickUp", ("a",))), _pol(("PickUp", ("b",)))
    assert render(translate([x, y], [ConnectiveLink(ConnectiveKind.OR, 0, 1)])) == "F(PickUp(a) | PickUp(b))"
    f = translate([x, y], [ConnectiveLink(ConnectiveKind.NOT, 1)])
    assert render(f) == "F(PickUp(a)) & G(!F(PickUp(b)))"
    assert linearize(f) == [PrimitiveCall("PickUp", ("a",))]
    with pytest.raises(LTLError):
        translate([x], [ConnectiveLink(ConnectiveKind.OR, 0, 3)])


def test_multi_action_spine_orders_actions():
    f = translate([_pol(("GoTo", ("fridge",)), ("OpenObject", ("fridge",))), _pol(("PickUp", ("egg",)))])
    assert render(f) == "F(GoTo(fridge) & F(OpenObject(fridge) & F(PickUp(egg))))"


@pytest.mark.parametrize("trace, expected", [
    ([{"a"}, {"b"}], True),
    ([{"b"}, {"a"}], False),
    ([{"a", "b"}], True),
    ([{"b"}, {"a"}, set()], False),
    ([{"a", "b"}, {"b"}], True),
    ([], False),
])
def test_evaluate_sequenced_visit(trace, expected):
    assert evaluate(sequenced_visit([a, b]), trace) is expected


def test_end_of_trace_conventions():
    assert evaluate(Globally(TRUE), [])
    assert evaluate(Globally(a), [])
    assert not evaluate(Finally(TRUE), [])
    assert not evaluate(Until(TRUE, TRUE), [])
    assert evaluate(Globally(Finally(a)), [{"a"}, set(), {"a"}])
    assert not evaluate(Globally(Finally(a)), [{"a"}, set()])


@pytest.mark.parametrize("text, expected", [
    ("a U b", Until(a, b)),
    ("!a U b", Until(Not(a), b)),
    ("a & b | c", Or(And(a, b), c)),
    ("a | b & c", Or(a, And(b, c))),
    ("a U b U c", Until(a, Until(b, c))),
    ("F(a & F(b))", Finally(And(a, Finally(b)))),
    ("G(!a)", Globally(Not(a))),
    ("true", TRUE),
    ("PutIn( apple ,fridge )", Atom("PutIn(apple, fridge)")),
])
def test_parse(text, expected):
    assert parse(text) == expected


@pytest.mark.parametrize("text, offset", [("a &", 3), ("a $ b", 2), ("F a", 2), ("(a", 2), ("U b", 0), ("a b", 2)])
def test_parse_errors_carry_offsets(text, offset):
    with pytest.raises(FormulaSyntaxError) as err:
        parse(text)
    assert err.value.offset == offset


def test_unicode_rendering():
    assert render(sequenced_visit([a, b]), unicode=True) == "𝐅(a ∧ 𝐅(b))"


_atoms = st.sampled_from([a, b, c, Atom("GoTo(fridge)"), Atom("PutIn(apple, fridge)"), Atom("water_boiling"), TRUE])
_formula = st.recursive(_atoms, lambda s: st.one_of(
    st.builds(Not, s), st.builds(Finally, s), st.builds(Globally, s),
    st.builds(And, s, s), st.builds(Or, s, s), st.builds(Until, s, s)), max_leaves=12)


@given(_formula)
def test_render_parse_round_trip(f):
    assert parse(render(f)) == f


@given(_formula, st.lists(st.sets(st.sampled_from(["a", "b", "c"])), max_size=5))
@settings(max_examples=300)
def test_evaluate_matches_oracle_on_random_formulas(f, trace):
    assert evaluate(f, trace) == holds(f, trace)


def test_exhaustive_depth_two_against_oracle():
    fs = formulas(2)
    assert len(fs) == count_formulas(2) == 64
    ts = list(traces(4))
    for f in fs:
        for t in ts:
            assert evaluate(f, t) == holds(f, t), (render(f), t)


def test_operator_level_agreement_covers_all_child_valuations():
    # with atom operands every pair of child truth patterns of length <= 5 occurs
    ops = [Not(a), Finally(a), Globally(a), And(a, b), Or(a, b), Until(a, b)]
    for t in traces(5, ("a", "b")):
        for f in ops:
            for i in range(len(t) + 1):
                assert evaluate(f, t[i:]) == holds(f, t, i)


def test_formula_counts():
    assert count_formulas(1) == 4
    assert count_formulas(3) == 12484
    assert len(formulas(3)) == 12484
    assert count_formulas(4) > 4 * 10 ** 8
    assert max(depth(f) for f in formulas(3)) == 3


@pytest.mark.parametrize("seed", range(50))
def test_linearize_inverts_translate(seed):
    policies = random_policy_set(seed)
    f = translate(policies)
    calls = [x for p in policies for x in p.calls]
    assert linearize(f) == calls
    assert evaluate(f, execution_trace(linearize(f)))


def test_self_consistency_with_links():
    rng = random.Random(7)
    for seed in range(30):
        policies = random_policy_set(seed)
        links = []
        if len(policies) > 1 and rng.random() < 0.5:
            links.append(ConnectiveLink(ConnectiveKind.OR, 0, 1))
        if len(policies) > 2:
            links.append(ConnectiveLink(ConnectiveKind.NOT, len(policies) - 1))
        try:
            f = translate(policies, links)
        except LTLError:
            continue
        assert evaluate(f, execution_trace(linearize(f))), render(f)


@pytest.mark.parametrize("text", ["G(a)", "a U b", "F(a) & F(b)", "!a", "F(G(a))"])
def test_linearize_rejects_non_plan_formulas(text):
    with pytest.raises(NonPlanFormula):
        linearize(parse(text))


def test_linearize_or_takes_left_branch():
    assert linearize(parse("F(a() | b())")) == [PrimitiveCall("a")]
