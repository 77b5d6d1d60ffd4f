"""Shared domain vocabulary: recipes, steps, salient categories, action
descriptions, primitive schemas and grounded primitive calls."""

from __future__ import annotations

import ast
import enum
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence


class Provenance(str, enum.Enum):
    RAW = "raw"
    PREPROCESSED = "preprocessed"


class SalientCategory(str, enum.Enum):
    VERB = "Verb"
    WHAT = "What"
    WHERE = "Where"
    HOW = "How"
    TIME = "Time"
    TEMPERATURE = "Temperature"

    @classmethod
    def from_label(cls, label: str) -> "SalientCategory":
        key = label.strip().rstrip("?").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown salient category {label!r}")


class Sequencer(str, enum.Enum):
    UNTIL = "until"
    BEFORE = "before"
    ONCE = "once"


class TimeKind(str, enum.Enum):
    DURATION = "duration"
    CONDITION = "condition"


class Origin(str, enum.Enum):
    IDENTITY = "identity"
    LLM = "llm"
    LIBRARY = "library"
    SEED = "seed"


class AblationMode(str, enum.Enum):
    """Which reduction shortcuts are active (baseline, primitive-aware, library)."""

    AR_STAR = "ar-star"
    AR = "ar"
    AR_LIB = "ar-lib"

    @classmethod
    def parse(cls, text: str) -> "AblationMode":
        norm = text.strip().lower().replace("_", "-").replace("*", "-star")
        aliases = {"ar-star": cls.AR_STAR, "arstar": cls.AR_STAR, "ar": cls.AR,
                   "ar-lib": cls.AR_LIB, "arlib": cls.AR_LIB, "ar+lib": cls.AR_LIB}
        try:
            return aliases[norm]
        except KeyError:
            raise ValueError(f"unknown ablation mode {text!r}") from None


@dataclass(frozen=True)
class InstructionStep:
    index: int
    text: str
    provenance: Provenance = Provenance.RAW
    unresolved: bool = False


@dataclass(frozen=True)
class Recipe:
    id: str
    title: str
    ingredients: tuple[str, ...]
    steps: tuple[InstructionStep, ...]

    def __post_init__(self):
        for expected, step in enumerate(self.steps, start=1):
            if step.index != expected:
                raise ValueError(f"recipe {self.id!r}: step indices must run 1..k, got {step.index} at {expected}")

    @classmethod
    def from_dict(cls, data: dict) -> "Recipe":
        steps = tuple(InstructionStep(i, text) for i, text in enumerate(data["steps"], start=1))
        return cls(str(data["id"]), data.get("title", ""), tuple(data.get("ingredients", ())), steps)

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "ingredients": list(self.ingredients),
                "steps": [s.text for s in self.steps]}


def load_recipe(path: str | Path) -> Recipe:
    """Read a Recipe1M+-style JSON file, or plain text with one step per line."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return Recipe.from_dict(json.loads(text))
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    return Recipe.from_dict({"id": path.stem, "title": path.stem, "ingredients": [], "steps": lines})


@dataclass(frozen=True)
class Chunk:
    category: SalientCategory
    text: str
    span: tuple[int, int]

    def overlaps(self, other: "Chunk") -> bool:
        return self.span[0] < other.span[1] and other.span[0] < self.span[1]


@dataclass(frozen=True)
class TimeSpec:
    raw: str
    kind: TimeKind
    sequencer: Optional[Sequencer]
    payload: str

    def __post_init__(self):
        if self.kind is TimeKind.CONDITION and self.sequencer is None:
            raise ValueError("condition time spec needs a sequencer")


_ROLE_ORDER = ("what", "where", "how", "time", "temperature")


@dataclass(frozen=True)
class ActionDescription:
    """One detected action, ``verb(what, where, how, time, temperature)``."""

    verb: str
    what: Optional[str] = None
    where_: Optional[str] = None
    how: Optional[str] = None
    time: Optional[TimeSpec] = None
    temperature: Optional[str] = None
    source_step: int = 1
    ordinal_in_step: int = 0

    def __post_init__(self):
        if not self.verb:
            raise ValueError("action verb must be non-empty")

    def params(self) -> dict[str, str]:
        """Present parameters in role order, keyed by their serialized name."""
        values = {
            "what": self.what,
            "where": self.where_,
            "how": self.how,
            "time": self.time.raw if self.time else None,
            "temperature": self.temperature,
        }
        return {k: v for k, v in values.items() if v}

    def to_call_string(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.verb}({args})"

    @classmethod
    def from_call_string(cls, text: str, source_step: int = 1, ordinal_in_step: int = 0) -> "ActionDescription":
        """Parse ``verb(x, where='y')``; positional args fill roles in order."""
        try:
            node = ast.parse(text.strip(), mode="eval").body
        except SyntaxError as exc:
            raise ValueError(f"not a function-call string: {text!r}") from exc
        if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
            raise ValueError(f"not a function-call string: {text!r}")

        def value(arg: ast.expr) -> str:
            if isinstance(arg, ast.Constant):
                return str(arg.value)
            if isinstance(arg, ast.Name):
                return arg.id.replace("_", " ")
            raise ValueError(f"unsupported argument in {text!r}")

        if len(node.args) > len(_ROLE_ORDER):
            raise ValueError(f"too many arguments in {text!r}")
        roles: dict[str, str] = {}
        for role, arg in zip(_ROLE_ORDER, node.args):
            roles[role] = value(arg)
        for kw in node.keywords:
            name = "where" if kw.arg == "where_" else kw.arg
            if name not in _ROLE_ORDER:
                raise ValueError(f"unknown parameter {kw.arg!r} in {text!r}")
            roles[name] = value(kw.value)
        from .lexicon import default_lexicon, lemma_verb, parse_time

        time = parse_time(roles["time"], default_lexicon()) if "time" in roles else None
        return cls(
            verb=lemma_verb(node.func.id),
            what=roles.get("what"),
            where_=roles.get("where"),
            how=roles.get("how"),
            time=time,
            temperature=roles.get("temperature"),
            source_step=source_step,
            ordinal_in_step=ordinal_in_step,
        )


@dataclass(frozen=True)
class PrimitiveSchema:
    name: str
    param_roles: tuple[str, ...]
    aliases: tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.param_roles)


class PrimitiveSet:
    """Ordered, name-unique collection of primitive action schemas."""

    def __init__(self, schemas: Iterable[PrimitiveSchema]):
        self._schemas: dict[str, PrimitiveSchema] = {}
        for schema in schemas:
            if schema.name in self._schemas:
                raise ValueError(f"duplicate primitive {schema.name!r}")
            self._schemas[schema.name] = schema
        self._aliases = {}
        for schema in self._schemas.values():
            self._aliases[schema.name.lower()] = schema
            for alias in schema.aliases:
                self._aliases.setdefault(alias.lower(), schema)

    def __contains__(self, name: object) -> bool:
        return name in self._schemas

    def __iter__(self) -> Iterator[PrimitiveSchema]:
        return iter(self._schemas.values())

    def __len__(self) -> int:
        return len(self._schemas)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PrimitiveSet) and list(self) == list(other)

    def names(self) -> list[str]:
        return list(self._schemas)

    def get(self, name: str) -> Optional[PrimitiveSchema]:
        return self._schemas.get(name)

    def for_verb(self, verb: str) -> Optional[PrimitiveSchema]:
        """Schema a high-level verb maps to without reduction, if any."""
        return self._aliases.get(verb.lower())

    @classmethod
    def from_config(cls, data: dict) -> "PrimitiveSet":
        return cls(
            PrimitiveSchema(a["name"], tuple(a.get("params", ())), tuple(a.get("aliases", ())))
            for a in data["actions"]
        )

    def to_config(self) -> dict:
        actions = []
        for s in self:
            entry = {"name": s.name, "params": list(s.param_roles)}
            if s.aliases:
                entry["aliases"] = list(s.aliases)
            actions.append(entry)
        return {"actions": actions}


def load_primitive_set(path: str | Path) -> PrimitiveSet:
    return PrimitiveSet.from_config(json.loads(Path(path).read_text(encoding="utf-8")))


def default_primitive_set() -> PrimitiveSet:
    """The twelve-schema kitchen action set used unless configured otherwise."""
    return PrimitiveSet([
        PrimitiveSchema("GoTo", ("target",), ("go",)),
        PrimitiveSchema("PickUp", ("object",), ("pick",)),
        PrimitiveSchema("PutOn", ("object", "surface")),
        PrimitiveSchema("PutIn", ("object", "container")),
        PrimitiveSchema("OpenObject", ("object",), ("open",)),
        PrimitiveSchema("CloseObject", ("object",), ("close",)),
        PrimitiveSchema("ToggleOn", ("appliance",)),
        PrimitiveSchema("ToggleOff", ("appliance",)),
        PrimitiveSchema("SliceObject", ("object",), ("slice",)),
        PrimitiveSchema("BreakObject", ("object",), ("break", "crack")),
        PrimitiveSchema("PourInto", ("source", "destination"), ("pour",)),
        PrimitiveSchema("Wait", ("condition",), ("wait",)),
    ])


_ARG_SANITIZE = re.compile(r"[(),]")


@dataclass(frozen=True)
class PrimitiveCall:
    name: str
    args: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        for arg in self.args:
            if _ARG_SANITIZE.search(arg):
                raise ValueError(f"argument {arg!r} may not contain parentheses or commas")

    def render(self) -> str:
        return f"{self.name}({', '.join(self.args)})"

    def __str__(self) -> str:
        return self.render()


def is_admissible(call: PrimitiveCall, primitives: PrimitiveSet) -> bool:
    schema = primitives.get(call.name)
    return schema is not None and schema.arity == len(call.args)


@dataclass(frozen=True)
class ReductionPolicy:
    key: str
    calls: tuple[PrimitiveCall, ...]
    origin: Origin

    def __post_init__(self):
        object.__setattr__(self, "calls", tuple(self.calls))
        if not self.calls:
            raise ValueError(f"policy {self.key!r} has no calls")
        if self.origin is Origin.IDENTITY:
            if len(self.calls) != 1 or self.calls[0].name.lower() != self.key.split("/")[0]:
                raise ValueError(f"identity policy {self.key!r} must be exactly its own primitive")

    def with_origin(self, origin: Origin) -> "ReductionPolicy":
        return replace(self, origin=origin)

    def to_dict(self) -> dict:
        return {"key": self.key, "origin": self.origin.value,
                "plan": [{"name": c.name, "args": list(c.args)} for c in self.calls]}

    @classmethod
    def from_dict(cls, data: dict) -> "ReductionPolicy":
        calls = tuple(PrimitiveCall(c["name"], tuple(c.get("args", ()))) for c in data["plan"])
        return cls(data["key"], calls, Origin(data["origin"]))


def flatten_calls(policies: Sequence[ReductionPolicy]) -> list[PrimitiveCall]:
    return [call for p in policies for call in p.calls]
