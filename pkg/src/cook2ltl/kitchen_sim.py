"""Discrete kitchen world: object state, primitive-call transitions, goal checks.

Places: a non-pickupable object (fridge, stove, counter) is its own place; a
pickupable object is at the place of whatever holds it. The agent can
manipulate anything at its current place.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

from .core import PrimitiveCall, default_primitive_set
from .ltl import BEFORE_MARKER

AGENT = "agent"
_PRIMITIVES = default_primitive_set()
DEFAULT_COOK_DELAY = 3

# condition -> heaters that can bring it about
CONDITIONS: dict[str, tuple[str, ...]] = {
    "water_boiling": ("stove",),
    "golden_brown": ("stove", "oven", "toaster"),
    "softened": ("microwave", "stove", "oven"),
    "melted": ("microwave", "stove"),
}


@dataclass
class ObjectState:
    location: str
    sliced: bool = False
    broken: bool = False
    cooked: bool = False
    open: Optional[bool] = None
    powered: Optional[bool] = None
    contains: set[str] = field(default_factory=set)
    receptacle: bool = False
    pickupable: bool = True
    heater: bool = False
    powered_since: Optional[int] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["contains"] = sorted(self.contains)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectState":
        data = dict(data)
        data["contains"] = set(data.get("contains", ()))
        return cls(**data)


@dataclass
class WorldState:
    objects: dict[str, ObjectState]
    agent_at: str = "counter"
    holding: Optional[str] = None
    clock: int = 0

    def __post_init__(self):
        if self.holding is not None and self.objects[self.holding].location != AGENT:
            raise ValueError(f"held object {self.holding!r} must be located at the agent")
        for name, obj in self.objects.items():
            if obj.powered is not None and obj.pickupable:
                raise ValueError(f"{name!r} is switchable but not a fixed appliance")
        owners: dict[str, str] = {}
        for name, obj in self.objects.items():
            for item in obj.contains:
                if item in owners:
                    raise ValueError(f"{item!r} is inside both {owners[item]!r} and {name!r}")
                owners[item] = name

    def to_dict(self) -> dict:
        return {"agent_at": self.agent_at, "holding": self.holding, "clock": self.clock,
                "objects": {k: v.to_dict() for k, v in sorted(self.objects.items())}}

    @classmethod
    def from_dict(cls, data: dict) -> "WorldState":
        objects = {k: ObjectState.from_dict(v) for k, v in data["objects"].items()}
        return cls(objects, data.get("agent_at", "counter"), data.get("holding"), data.get("clock", 0))


class ExecError(Exception):
    """A precondition of ``call`` failed; ``predicate`` names which one."""

    def __init__(self, call: PrimitiveCall, predicate: str):
        super().__init__(f"{call.render()}: {predicate}")
        self.call = call
        self.predicate = predicate


class Kitchen:
    def __init__(self, cook_delay: int = DEFAULT_COOK_DELAY):
        if cook_delay < 0:
            raise ValueError("cook_delay must be non-negative")
        self.cook_delay = cook_delay

    def step(self, w: WorldState, call: PrimitiveCall) -> WorldState:
        """State after executing ``call``; raises ExecError on a failed precondition."""
        handler = getattr(self, f"_do_{call.name}", None)
        schema = _PRIMITIVES.get(call.name)
        if handler is None or schema is None:
            raise ExecError(call, f"{call.name} is not a primitive action")
        if schema.arity != len(call.args):
            raise ExecError(call, f"{call.name} takes {schema.arity} argument(s)")
        nxt = copy.deepcopy(w)
        _propagate_heat(w, nxt)
        handler(nxt, call, *call.args)
        nxt.clock = max(nxt.clock, w.clock + 1)
        return nxt

    # -- handlers --------------------------------------------------------

    def _do_GoTo(self, w, call, target):
        if target not in w.objects and not any(o.location == target for o in w.objects.values()):
            raise ExecError(call, f"unknown place {target!r}")
        w.agent_at = target

    def _do_PickUp(self, w, call, obj):
        o = _obj(w, call, obj)
        if not o.pickupable:
            raise ExecError(call, f"{obj} is not pickupable")
        if w.holding is not None:
            raise ExecError(call, f"hand must be empty (holding {w.holding})")
        _require_near(w, call, obj)
        container = w.objects.get(o.location)
        if container is not None and container.open is False:
            raise ExecError(call, f"{o.location} must be open")
        if container is not None:
            container.contains.discard(obj)
        o.location = AGENT
        w.holding = obj

    def _put(self, w, call, obj, dest, need_open):
        _obj(w, call, obj)
        d = _obj(w, call, dest)
        if w.holding != obj:
            raise ExecError(call, f"{obj} must be held")
        if not d.receptacle:
            raise ExecError(call, f"{dest} is not a receptacle")
        _require_near(w, call, dest)
        if need_open and d.open is False:
            raise ExecError(call, f"{dest} must be open")
        w.objects[obj].location = dest
        d.contains.add(obj)
        w.holding = None

    def _do_PutOn(self, w, call, obj, surface):
        self._put(w, call, obj, surface, need_open=False)

    def _do_PutIn(self, w, call, obj, container):
        self._put(w, call, obj, container, need_open=True)

    def _set_open(self, w, call, obj, value):
        o = _obj(w, call, obj)
        if o.open is None:
            raise ExecError(call, f"{obj} cannot be opened or closed")
        _require_near(w, call, obj)
        o.open = value

    def _do_OpenObject(self, w, call, obj):
        self._set_open(w, call, obj, True)

    def _do_CloseObject(self, w, call, obj):
        self._set_open(w, call, obj, False)

    def _set_power(self, w, call, obj, value):
        o = _obj(w, call, obj)
        if o.powered is None:
            raise ExecError(call, f"{obj} cannot be switched")
        _require_near(w, call, obj)
        if value and not o.powered:
            o.powered_since = w.clock + 1
        if not value:
            o.powered_since = None
        o.powered = value

    def _do_ToggleOn(self, w, call, obj):
        self._set_power(w, call, obj, True)

    def _do_ToggleOff(self, w, call, obj):
        self._set_power(w, call, obj, False)

    def _do_SliceObject(self, w, call, obj):
        o = _obj(w, call, obj)
        if not o.pickupable:
            raise ExecError(call, f"{obj} cannot be sliced")
        _require_near(w, call, obj)
        o.sliced = True

    def _do_BreakObject(self, w, call, obj):
        o = _obj(w, call, obj)
        if not o.pickupable:
            raise ExecError(call, f"{obj} cannot be broken")
        _require_near(w, call, obj)
        o.broken = True

    def _do_PourInto(self, w, call, source, dest):
        s, d = _obj(w, call, source), _obj(w, call, dest)
        if w.holding != source:
            raise ExecError(call, f"{source} must be held")
        if not d.receptacle:
            raise ExecError(call, f"{dest} is not a receptacle")
        _require_near(w, call, dest)
        for item in sorted(s.contains):
            w.objects[item].location = dest
            d.contains.add(item)
        s.contains.clear()

    def _do_Wait(self, w, call, cond):
        if cond.startswith(BEFORE_MARKER):
            return
        if cond not in CONDITIONS:
            raise ExecError(call, f"unknown condition {cond!r}")
        ready = []
        for name in CONDITIONS[cond]:
            o = w.objects.get(name)
            if o is not None and o.powered and _contents(w, name):
                ready.append(o.powered_since + self.cook_delay)
        if not ready:
            raise ExecError(call, f"{cond} requires a powered {' or '.join(CONDITIONS[cond])} with contents")
        w.clock = max(w.clock + 1, min(ready))
        for name in CONDITIONS[cond]:
            if w.objects.get(name) is not None and w.objects[name].powered:
                for item in _contents(w, name):
                    w.objects[item].cooked = True


def _obj(w: WorldState, call: PrimitiveCall, name: str) -> ObjectState:
    if name not in w.objects:
        raise ExecError(call, f"unknown object {name!r}")
    return w.objects[name]


def place_of(w: WorldState, name: str) -> str:
    seen = set()
    while name in w.objects and w.objects[name].pickupable and name not in seen:
        seen.add(name)
        loc = w.objects[name].location
        if loc == AGENT:
            return place_of(w, w.agent_at) if w.agent_at != name else w.agent_at
        name = loc
    return name


def _require_near(w: WorldState, call: PrimitiveCall, name: str):
    if w.objects[name].location == AGENT:
        return
    here = place_of(w, w.agent_at) if w.agent_at in w.objects else w.agent_at
    if place_of(w, name) != here:
        raise ExecError(call, f"agent must be at {place_of(w, name)} (is at {here})")


def _contents(w: WorldState, name: str) -> list[str]:
    out = []
    for item in sorted(w.objects[name].contains):
        out.append(item)
        out.extend(_contents(w, item))
    return out


def _propagate_heat(before: WorldState, after: WorldState):
    """Contents of heaters powered in ``before`` are cooked in ``after``."""
    for name, o in before.objects.items():
        if o.heater and o.powered:
            for item in _contents(before, name):
                after.objects[item].cooked = True


_default = Kitchen()


def step(w: WorldState, call: PrimitiveCall) -> WorldState:
    return _default.step(w, call)


# -- tasks -----------------------------------------------------------------

@dataclass
class TaskSpec:
    name: str
    initial: WorldState
    instruction: str
    goal: list[tuple[str, str, Any]]

    def __post_init__(self):
        self.goal = [tuple(g) for g in self.goal]
        for obj, fld, _ in self.goal:
            if obj not in self.initial.objects:
                raise ValueError(f"goal names unknown object {obj!r}")
            if not hasattr(self.initial.objects[obj], fld):
                raise ValueError(f"goal field {fld!r} does not exist on {obj!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "instruction": self.instruction, "initial": self.initial.to_dict(),
                "goal": [list(g) for g in self.goal]}

    @classmethod
    def from_dict(cls, data: dict) -> "TaskSpec":
        return cls(data["name"], WorldState.from_dict(data["initial"]), data["instruction"], data["goal"])


def load_task(path: str | Path) -> TaskSpec:
    return TaskSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def goal_failures(task: TaskSpec, w: WorldState) -> list[str]:
    out = []
    for obj, fld, expected in task.goal:
        actual = getattr(w.objects[obj], fld)
        if actual != expected:
            out.append(f"{obj}.{fld} expected {expected!r}, got {actual!r}")
    return out


def kitchen_world() -> WorldState:
    """Mise-en-place kitchen: every object's location is known."""
    fixed = dict(pickupable=False)
    objects = {
        "counter": ObjectState("kitchen", receptacle=True, **fixed),
        "fridge": ObjectState("kitchen", receptacle=True, open=False, **fixed),
        "stove": ObjectState("kitchen", receptacle=True, powered=False, heater=True, **fixed),
        "microwave": ObjectState("kitchen", receptacle=True, open=False, powered=False, heater=True, **fixed),
        "sink": ObjectState("kitchen", receptacle=True, **fixed),
        "pot": ObjectState("stove", receptacle=True),
        "pan": ObjectState("counter", receptacle=True),
        "bowl": ObjectState("counter", receptacle=True),
        "knife": ObjectState("counter"),
        "potato": ObjectState("counter"),
        "tomato": ObjectState("counter"),
        "bread": ObjectState("counter"),
        "apple": ObjectState("counter"),
        "egg": ObjectState("fridge"),
        "water": ObjectState("pot"),
    }
    for name, o in objects.items():
        if o.location in objects:
            objects[o.location].contains.add(name)
    return WorldState(objects, agent_at="counter")


def builtin_tasks() -> list[TaskSpec]:
    potato = TaskSpec("microwave_potato", kitchen_world(), "Microwave the potato.", [("potato", "cooked", True)])
    tomato = TaskSpec("chop_tomato", kitchen_world(), "Chop the tomato.", [("tomato", "sliced", True)])
    bread = TaskSpec("cut_bread", kitchen_world(), "Cut the bread.", [("bread", "sliced", True)])
    w = kitchen_world()
    w.objects["counter"].contains.discard("apple")
    w.objects["apple"].location = AGENT
    w.holding = "apple"
    apple = TaskSpec("refrigerate_apple", w, "Refrigerate the apple.",
                     [("apple", "location", "fridge"), ("fridge", "open", False)])
    return [potato, tomato, bread, apple]


def get_task(name: str) -> TaskSpec:
    for t in builtin_tasks():
        if t.name == name:
            return t
    raise KeyError(f"unknown task {name!r}; choose from {[t.name for t in builtin_tasks()]}")


# -- runs -------------------------------------------------------------------

@dataclass
class RunReport:
    task: str
    success: bool
    steps_executed: int
    formula: str
    failure: Optional[str] = None
    goal_failures: list[str] = field(default_factory=list)
    llm_calls: int = 0
    plan: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def execute(w: WorldState, calls: list[PrimitiveCall], kitchen: Kitchen = _default
            ) -> tuple[WorldState, int, Optional[ExecError]]:
    for i, call in enumerate(calls):
        try:
            w = kitchen.step(w, call)
        except ExecError as exc:
            return w, i, exc
    return w, len(calls), None


def run_task(task: TaskSpec, pipeline, kitchen: Kitchen = _default) -> RunReport:
    """Translate the task instruction, execute the plan, check the goal.

    Success needs every goal predicate and the formula to hold on the
    execution trace.
    """
    from .core import InstructionStep, Recipe
    from .ltl import evaluate, execution_trace, linearize, render

    meter = getattr(pipeline, "meter", None)
    calls_before = meter.calls if meter is not None else 0
    try:
        result = pipeline.translate_recipe(Recipe(task.name, task.name, (), (InstructionStep(1, task.instruction),)))
    except Exception as exc:  # pipeline errors become part of the report
        return RunReport(task.name, False, 0, "", failure=f"{type(exc).__name__}: {exc}",
                         llm_calls=(meter.calls if meter is not None else 0) - calls_before)
    formula = result.formula
    plan = linearize(formula)
    final, executed, error = execute(copy.deepcopy(task.initial), plan, kitchen)
    llm_calls = (meter.calls if meter is not None else 0) - calls_before
    rendered = render(formula)
    plan_text = [c.render() for c in plan]
    if error is not None:
        return RunReport(task.name, False, executed, rendered, str(error), [], llm_calls, plan_text)
    unmet = goal_failures(task, final)
    holds = evaluate(formula, execution_trace(plan))
    failure = None
    if unmet:
        failure = "goal unmet: " + "; ".join(unmet)
    elif not holds:
        failure = "execution trace violates the formula"
    return RunReport(task.name, failure is None, executed, rendered, failure, unmet, llm_calls, plan_text)
