import json

import pytest

from cook2ltl.core import PrimitiveCall
from cook2ltl.harness import data_dir
from cook2ltl.kitchen_sim import (AGENT, ExecError, Kitchen, ObjectState, TaskSpec, WorldState, builtin_tasks, execute,
                                  get_task, goal_failures, kitchen_world, load_task, run_task, step)
from cook2ltl.llm_client import MockLLM
from cook2ltl.ltl import Atom, atom_call
from cook2ltl.pipeline import Cook2LTL


def C(text):
    return atom_call(Atom(text))


def run(calls, w=None):
    w = w or kitchen_world()
    for text in calls:
        w = step(w, C(text))
    return w


def sim_fixtures(variant):
    return json.loads((data_dir() / "sim_fixtures.json").read_text())[variant]


def test_pickup_needs_proximity():
    with pytest.raises(ExecError, match="agent must be at"):
        step(kitchen_world(), C("PickUp(egg)"))


def test_pickup_from_closed_fridge_fails():
    with pytest.raises(ExecError, match="fridge must be open"):
        run(["GoTo(fridge)", "PickUp(egg)"])


def test_fetch_egg_from_fridge():
    w = run(["GoTo(fridge)", "OpenObject(fridge)", "PickUp(egg)"])
    assert w.holding == "egg" and w.objects["egg"].location == AGENT
    assert "egg" not in w.objects["fridge"].contains


def test_slice_sets_sliced_and_leaves_input_untouched():
    w0 = kitchen_world()
    w1 = step(w0, C("SliceObject(tomato)"))
    assert w1.objects["tomato"].sliced and not w0.objects["tomato"].sliced
    assert w1.clock == 1


def test_cannot_slice_appliance():
    with pytest.raises(ExecError):
        run(["GoTo(stove)", "SliceObject(stove)"])


def test_unknown_action_and_arity():
    with pytest.raises(ExecError, match="not a primitive"):
        step(kitchen_world(), C("Marinate(tomato)"))
    with pytest.raises(ExecError, match="argument"):
        step(kitchen_world(), PrimitiveCall("PutIn", ("tomato",)))


def test_put_in_closed_container_fails():
    with pytest.raises(ExecError, match="microwave must be open"):
        run(["PickUp(potato)", "GoTo(microwave)", "PutIn(potato, microwave)"])


def test_hand_holds_one_object():
    with pytest.raises(ExecError, match="hand must be empty"):
        run(["PickUp(potato)", "PickUp(tomato)"])


def test_microwave_cooks_contents():
    w = run(["PickUp(potato)", "GoTo(microwave)", "OpenObject(microwave)", "PutIn(potato, microwave)",
             "CloseObject(microwave)", "ToggleOn(microwave)", "Wait(softened)"])
    assert w.objects["potato"].cooked


def test_wait_blocks_until_cook_delay():
    w = run(["GoTo(stove)", "ToggleOn(stove)"])
    on_at = w.objects["stove"].powered_since
    w2 = step(w, C("Wait(water_boiling)"))
    assert w2.clock == on_at + 3
    assert Kitchen(cook_delay=6).step(w, C("Wait(water_boiling)")).clock == on_at + 6


def test_wait_needs_a_running_heater():
    with pytest.raises(ExecError, match="requires a powered stove"):
        step(kitchen_world(), C("Wait(water_boiling)"))
    with pytest.raises(ExecError, match="unknown condition"):
        step(kitchen_world(), C("Wait(caramelized)"))
    assert step(kitchen_world(), C("Wait(before:melted)")).clock == 1


def test_pour_moves_contents():
    w = run(["GoTo(stove)", "PickUp(pot)", "GoTo(sink)", "PourInto(pot, sink)"])
    assert w.objects["water"].location == "sink" and not w.objects["pot"].contains


def test_world_invariants():
    w = kitchen_world()
    with pytest.raises(ValueError):
        WorldState(w.objects, holding="apple")
    objs = dict(w.objects, blender=ObjectState("counter", powered=False))
    with pytest.raises(ValueError):
        WorldState(objs)
    objs = dict(w.objects)
    objs["bowl"] = ObjectState("counter", receptacle=True, contains={"egg"})
    with pytest.raises(ValueError):
        WorldState(objs)


def test_world_json_round_trip():
    w = run(["GoTo(fridge)", "OpenObject(fridge)", "PickUp(egg)"])
    assert WorldState.from_dict(json.loads(json.dumps(w.to_dict()))) == w


def test_task_json_round_trip(tmp_path):
    task = get_task("refrigerate_apple")
    path = tmp_path / "task.json"
    path.write_text(json.dumps(task.to_dict()))
    loaded = load_task(path)
    assert loaded.to_dict() == task.to_dict()
    with pytest.raises(ValueError):
        TaskSpec("bad", kitchen_world(), "x", [("unicorn", "sliced", True)])
    with pytest.raises(KeyError):
        get_task("bake_cake")


def test_goal_failures_report_mismatches():
    task = get_task("chop_tomato")
    assert goal_failures(task, kitchen_world()) == ["tomato.sliced expected True, got False"]


def test_execute_stops_at_first_failure():
    w, executed, err = execute(kitchen_world(), [C("GoTo(fridge)"), C("PickUp(egg)"), C("GoTo(counter)")])
    assert executed == 1 and err.predicate == "fridge must be open"


@pytest.mark.parametrize("task", [t.name for t in builtin_tasks()])
def test_tasks_succeed_with_correct_fixtures(task):
    pipeline = Cook2LTL(MockLLM(sim_fixtures("correct")))
    reports = [run_task(get_task(task), pipeline) for _ in range(10)]
    assert all(r.success for r in reports), reports[0].failure
    assert reports[0].llm_calls <= 1 and all(r.llm_calls == 0 for r in reports[1:])


@pytest.mark.parametrize("task", [t.name for t in builtin_tasks()])
def test_corrupted_fixture_failure_propagates(task):
    pipeline = Cook2LTL(MockLLM(sim_fixtures("corrupted")))
    reports = [run_task(get_task(task), pipeline) for _ in range(10)]
    assert not any(r.success for r in reports)
    assert len({r.failure for r in reports}) == 1


def test_runs_are_deterministic():
    def once():
        pipeline = Cook2LTL(MockLLM(sim_fixtures("correct")))
        return [run_task(t, pipeline).to_json() for t in builtin_tasks()]

    assert once() == once()


def test_pipeline_error_becomes_report():
    report = run_task(get_task("microwave_potato"), Cook2LTL(MockLLM({})))
    assert not report.success and "MissingFixture" in report.failure
