import pytest

from cook2ltl.action_library import ActionLibrary
from cook2ltl.action_reduction import (EmptyPlan, RecursionLimit, Reducer, apply_wait, build_prompt, load_exemplars,
                                       parse_llm_plan, signature_for, wait_extraction)
from cook2ltl.core import (AblationMode, ActionDescription, Origin, PrimitiveCall, ReductionPolicy,
                           default_primitive_set)
from cook2ltl.lexicon import parse_time
from cook2ltl.llm_client import MeteredClient, MockLLM

PS = default_primitive_set()
FRIDGE = "GoTo(fridge)\nOpenObject(fridge)\nPutIn(apple, fridge)\nCloseObject(fridge)"
BOIL = "GoTo(pot)\nToggleOn(stove)\nWait(water is boiling)\nPickUp(eggs)"


def _lib():
    return ActionLibrary.seeded(PS)


def _boil_eggs(time=None):
    return ActionDescription("boil", what="the eggs", time=parse_time(time) if time else None)


def test_prompt_for_refrigerate():
    prompt = build_prompt(ActionDescription("refrigerate", what="the apple"), _lib(), PS)
    assert prompt.import_line == "from kitchen import " + ", ".join(PS.names())
    assert len(prompt.examples) == 2
    assert prompt.query_signature == "def refrigerate(apple):"
    text = prompt.render()
    assert text.rstrip().endswith("def refrigerate(apple):")
    assert text.count("def ") == 3


def test_import_line_includes_cached_verb():
    lib = _lib()
    lib.insert("boil/egg", ReductionPolicy("boil/egg", (PrimitiveCall("GoTo", ("pot",)),), Origin.LLM))
    assert build_prompt(ActionDescription("chop", what="onion"), lib, PS).import_line.endswith(", Wait, boil")


def test_prompt_rendering_is_deterministic():
    a = _boil_eggs("until the water is boiling")
    assert build_prompt(a, _lib(), PS).render() == build_prompt(a, _lib(), PS).render()
    assert signature_for(a) == "def boil(eggs, until_water_is_boiling):"


def test_exemplar_file_has_two_entries():
    exemplars = load_exemplars()
    assert len(exemplars) == 2
    for ex in exemplars:
        assert ex.signature.startswith("def ") and ex.body


def test_parse_four_admissible_calls():
    out = parse_llm_plan(FRIDGE, PS, _lib())
    assert len(out.policy.calls) == 4 and out.admissible_fraction == 1.0 and not out.rejected_lines


def test_parse_rejects_unknown_action():
    out = parse_llm_plan("GoTo(chicken)\nMarinate(chicken)\nPickUp(chicken)", PS, _lib())
    assert out.rejected_lines[0][0] == "Marinate(chicken)"
    assert out.admissible_fraction == pytest.approx(2 / 3)


def test_parse_rejects_wrong_arity_and_ignores_prose():
    body = "# plan\nHere is the plan:\n    PutIn(apple)\n    GoTo(fridge)  # go\n\ndef helper():"
    out = parse_llm_plan(body, PS, _lib())
    assert [c.render() for c in out.policy.calls] == ["GoTo(fridge)"]
    assert len(out.rejected_lines) == 1 and out.parsed_calls == 2


def test_parse_normalizes_args_and_wait():
    out = parse_llm_plan("PickUp('The Eggs')\nWait(the water is boiling)", PS, _lib())
    assert [c.render() for c in out.policy.calls] == ["PickUp(eggs)", "Wait(water_boiling)"]


def test_library_call_is_spliced():
    lib = _lib()
    stored = (PrimitiveCall("GoTo", ("pot",)), PrimitiveCall("ToggleOn", ("stove",)))
    lib.insert("boil/egg", ReductionPolicy("boil/egg", stored, Origin.LLM))
    out = parse_llm_plan("GoTo(sink)\nboil(water)\nPickUp(pot)", PS, lib)
    assert [c.render() for c in out.policy.calls] == ["GoTo(sink)", "GoTo(pot)", "ToggleOn(stove)", "PickUp(pot)"]
    assert out.admissible_fraction == 1.0


def test_recursive_library_inlining_is_bounded():
    lib = ActionLibrary()
    lib.insert("a", ReductionPolicy("a", (PrimitiveCall("b"),), Origin.LLM))
    lib.insert("b", ReductionPolicy("b", (PrimitiveCall("a"),), Origin.LLM))
    with pytest.raises(RecursionLimit):
        parse_llm_plan("a()", PS, lib)


def test_empty_plans():
    with pytest.raises(EmptyPlan):
        parse_llm_plan("I cannot help with that.", PS, _lib())
    with pytest.raises(EmptyPlan) as err:
        parse_llm_plan("Marinate(chicken)", PS, _lib())
    assert err.value.rejected_lines


def _reducer(fixtures, lib=None):
    client = MeteredClient(MockLLM(fixtures))
    return Reducer(lib if lib is not None else _lib(), PS, client), client.meter


def test_identity_short_circuit_under_ar():
    reducer, meter = _reducer({})
    out = reducer.reduce(ActionDescription("slice", what="the tomato"), AblationMode.AR)
    assert not out.llm_called and out.policy.origin is Origin.IDENTITY
    assert out.policy.calls == (PrimitiveCall("SliceObject", ("tomato",)),)
    assert meter.calls == 0


def test_identity_fills_roles_from_where():
    reducer, _ = _reducer({})
    out = reducer.reduce(ActionDescription("go", where_="to the fridge"), AblationMode.AR)
    assert out.policy.calls == (PrimitiveCall("GoTo", ("fridge",)),)


def test_ar_lib_caches_after_first_call():
    reducer, meter = _reducer({"boil/egg": BOIL})
    first = reducer.reduce(_boil_eggs(), AblationMode.AR_LIB)
    second = reducer.reduce(_boil_eggs(), AblationMode.AR_LIB)
    assert first.llm_called and not second.llm_called
    assert second.policy.origin is Origin.LIBRARY and second.policy.calls == first.policy.calls
    assert meter.calls == 1


def test_ar_star_always_calls_and_never_caches():
    lib = _lib()
    reducer, meter = _reducer({"boil/egg": BOIL, "slice/tomato": "SliceObject(tomato)"}, lib)
    reducer.reduce(_boil_eggs(), AblationMode.AR_STAR)
    reducer.reduce(_boil_eggs(), AblationMode.AR_STAR)
    reducer.reduce(ActionDescription("slice", what="the tomato"), AblationMode.AR_STAR)
    assert meter.calls == 3 and len(lib) == 12


def test_ar_calls_llm_for_every_non_primitive():
    reducer, meter = _reducer({"boil/egg": BOIL})
    for _ in range(3):
        reducer.reduce(_boil_eggs(), AblationMode.AR)
    assert meter.calls == 3


def test_client_errors_propagate():
    reducer, _ = _reducer({})
    from cook2ltl.llm_client import MissingFixture

    with pytest.raises(MissingFixture):
        reducer.reduce(ActionDescription("flambe", what="the pan"), AblationMode.AR_LIB)


def test_wait_extraction():
    assert wait_extraction(_boil_eggs("until the water is boiling")) == PrimitiveCall("Wait", ("water_boiling",))
    assert wait_extraction(_boil_eggs()) is None
    assert wait_extraction(_boil_eggs("for 10 minutes")) is None
    before = wait_extraction(_boil_eggs("before the butter melts"))
    assert before == PrimitiveCall("Wait", ("before:butter_melted",))


def test_wait_inserted_before_post_condition_action():
    reducer, _ = _reducer({"boil/egg": "GoTo(pot)\nToggleOn(stove)\nPickUp(eggs)"})
    out = reducer.reduce(_boil_eggs("until the water is boiling"), AblationMode.AR_LIB)
    assert [c.render() for c in out.policy.calls] == ["GoTo(pot)", "ToggleOn(stove)", "Wait(water_boiling)",
                                                      "PickUp(eggs)"]


def test_wait_not_duplicated_and_placement_by_sequencer():
    p = ReductionPolicy("k", (PrimitiveCall("GoTo", ("a",)), PrimitiveCall("PickUp", ("a",))), Origin.LLM)
    once = apply_wait(p, _boil_eggs("once the butter melts"))
    assert once.calls[0] == PrimitiveCall("Wait", ("butter_melted",))
    before = apply_wait(p, _boil_eggs("before the butter melts"))
    assert before.calls[-1] == PrimitiveCall("Wait", ("before:butter_melted",))
    until = apply_wait(p, _boil_eggs("until golden brown"))
    assert apply_wait(until, _boil_eggs("until golden brown")) == until


def test_rejected_lines_are_never_silently_dropped():
    reducer, _ = _reducer({"boil/egg": "GoTo(pot)\nSimmer(pot)\nToggleOn(stove)"})
    out = reducer.reduce(_boil_eggs(), AblationMode.AR)
    assert all(c.name in PS for c in out.policy.calls)
    assert out.total_calls == out.admissible_calls + len(out.rejected_lines) == 3
