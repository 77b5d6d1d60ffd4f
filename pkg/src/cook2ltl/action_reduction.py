"""Reduce high-level actions to primitive calls with a code-style few-shot prompt."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .action_library import ActionLibrary, cache_key, key_verb
from .core import (AblationMode, ActionDescription, Origin, PrimitiveCall, PrimitiveSet, ReductionPolicy, Sequencer,
                   TimeKind)
from .lexicon import head_noun, identifier, lemma_verb, normalize_condition, strip_articles, strip_determiners
from .llm_client import CompletionRequest, LLMClient
from .ltl import BEFORE_MARKER, WAIT

MAX_SPLICE_DEPTH = 4
IMPORT_MODULE = "kitchen"


class ReductionError(ValueError):
    pass


class EmptyPlan(ReductionError):
    def __init__(self, message: str, rejected_lines: Sequence[tuple[str, str]] = ()):
        super().__init__(message)
        self.rejected_lines = list(rejected_lines)


class RecursionLimit(ReductionError):
    pass


@dataclass(frozen=True)
class Exemplar:
    signature: str
    body: tuple[str, ...]


def load_exemplars(path: Optional[str | Path] = None) -> list[Exemplar]:
    if path is None:
        text = resources.files("cook2ltl.data").joinpath("exemplars.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("exemplar file must hold a JSON list")
    return [Exemplar(e["signature"], tuple(e["body"])) for e in data]


@dataclass(frozen=True)
class PromptTemplate:
    import_line: str
    examples: tuple[Exemplar, ...]
    query_signature: str

    def render(self) -> str:
        parts = [self.import_line, ""]
        for ex in self.examples:
            parts.append(ex.signature)
            parts.extend(f"    {line}" for line in ex.body)
            parts.append("")
        parts.append(self.query_signature)
        return "\n".join(parts) + "\n"


def signature_for(action: ActionDescription) -> str:
    """``def verb(what, where, how, time, temperature):`` with absent roles omitted.

    >>> signature_for(ActionDescription("Refrigerate", what="the apple"))
    'def refrigerate(apple):'
    """
    params = []
    for value in action.params().values():
        ident = identifier(value)
        if ident:
            params.append(ident)
    return f"def {identifier(lemma_verb(action.verb)) or 'act'}({', '.join(params)}):"


def build_prompt(action: ActionDescription, lib: ActionLibrary, primitives: PrimitiveSet,
                 exemplars: Optional[Sequence[Exemplar]] = None, n_examples: int = 2) -> PromptTemplate:
    examples = list(exemplars) if exemplars is not None else load_exemplars()
    if len(examples) < n_examples:
        raise ValueError(f"need {n_examples} exemplars, have {len(examples)}")
    line = f"from {IMPORT_MODULE} import {', '.join(lib.import_list(primitives))}"
    return PromptTemplate(line, tuple(examples[:n_examples]), signature_for(action))


@dataclass(frozen=True)
class ReductionOutcome:
    policy: ReductionPolicy
    rejected_lines: tuple[tuple[str, str], ...] = ()
    admissible_fraction: float = 1.0
    llm_called: bool = False
    parsed_calls: int = 0

    @property
    def admissible_calls(self) -> int:
        return len(self.policy.calls)

    @property
    def total_calls(self) -> int:
        return len(self.policy.calls) + len(self.rejected_lines)


_CALL_LINE = re.compile(r"^([A-Za-z_]\w*)\s*\((.*)\)\s*;?\s*(?:#.*)?$")


def _clean_arg(arg: str) -> str:
    arg = arg.strip().strip("'\"").strip().lower()
    arg = re.sub(r"[(),]", " ", arg)
    return " ".join(strip_articles(arg).split())


def _library_policy(name: str, args: Sequence[str], lib: ActionLibrary) -> Optional[ReductionPolicy]:
    verb = lemma_verb(name)
    candidates = []
    if args:
        noun = head_noun(args[0])
        if noun:
            candidates.append(f"{verb}/{noun}")
    candidates.append(verb)
    for key in candidates:
        hit = lib.lookup(key)
        if hit is not None and hit.origin is not Origin.IDENTITY:
            return hit
    for key in lib.keys():
        if key_verb(key) == verb:
            hit = lib.lookup(key)
            if hit is not None and hit.origin is not Origin.IDENTITY:
                return hit
    return None


def _splice(policy: ReductionPolicy, primitives: PrimitiveSet, lib: ActionLibrary, depth: int) -> list[PrimitiveCall]:
    if depth > MAX_SPLICE_DEPTH:
        raise RecursionLimit(f"library inlining deeper than {MAX_SPLICE_DEPTH} at {policy.key!r}")
    out = []
    for call in policy.calls:
        if call.name in primitives:
            out.append(call)
            continue
        inner = _library_policy(call.name, call.args, lib)
        if inner is None:
            raise ReductionError(f"library entry {policy.key!r} calls unknown action {call.name!r}")
        out.extend(_splice(inner, primitives, lib, depth + 1))
    return out


def parse_llm_plan(completion: str, primitives: PrimitiveSet, lib: ActionLibrary, key: str = "plan",
                   llm_called: bool = True) -> ReductionOutcome:
    """Turn a completion body into a policy.

    Call-shaped lines are kept if their name is a primitive of matching
    arity, spliced if they name a cached library verb, and rejected
    otherwise. Other lines (comments, ``def``, prose) are ignored.
    """
    calls: list[PrimitiveCall] = []
    rejected: list[tuple[str, str]] = []
    parsed = 0
    for raw in completion.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _CALL_LINE.match(line)
        if not m or m.group(1) in ("def", "from", "import", "return"):
            continue
        parsed += 1
        name, body = m.group(1), m.group(2)
        if "(" in body or ")" in body:
            rejected.append((line, "nested call"))
            continue
        args = tuple(a for a in (_clean_arg(x) for x in body.split(",")) if a) if body.strip() else ()
        schema = primitives.get(name)
        if schema is not None:
            if schema.arity != len(args):
                rejected.append((line, f"{name} takes {schema.arity} argument(s), got {len(args)}"))
                continue
            if name == WAIT:
                cond = args[0]
                if cond.startswith(BEFORE_MARKER):
                    args = (BEFORE_MARKER + normalize_condition(cond[len(BEFORE_MARKER):]),)
                else:
                    args = (normalize_condition(cond),)
            calls.append(PrimitiveCall(name, args))
            continue
        stored = _library_policy(name, args, lib)
        if stored is not None:
            calls.extend(_splice(stored, primitives, lib, 1))
            continue
        rejected.append((line, f"{name} is not an available action"))
    if parsed == 0:
        raise EmptyPlan("completion contains no call-shaped lines")
    if not calls:
        raise EmptyPlan(f"all {parsed} call(s) were rejected", rejected)
    total = len(calls) + len(rejected)
    return ReductionOutcome(ReductionPolicy(key, tuple(calls), Origin.LLM), tuple(rejected), len(calls) / total,
                            llm_called, parsed)


def wait_extraction(action: ActionDescription) -> Optional[PrimitiveCall]:
    """The Wait call implied by a conditional Time, if any."""
    t = action.time
    if t is None or t.kind is not TimeKind.CONDITION:
        return None
    cond = normalize_condition(t.payload)
    if not cond:
        return None
    if t.sequencer is Sequencer.BEFORE:
        return PrimitiveCall(WAIT, (BEFORE_MARKER + cond,))
    return PrimitiveCall(WAIT, (cond,))


def apply_wait(policy: ReductionPolicy, action: ActionDescription) -> ReductionPolicy:
    """Ensure the policy carries the action's Wait.

    ``until`` waits sit right before the last call, ``once`` waits before
    the first, ``before`` waits are appended. Identity policies and
    policies already holding that Wait are returned unchanged.
    """
    wait = wait_extraction(action)
    if wait is None or policy.origin is Origin.IDENTITY or wait in policy.calls:
        return policy
    calls = list(policy.calls)
    seq = action.time.sequencer
    if seq is Sequencer.BEFORE:
        calls.append(wait)
    elif seq is Sequencer.ONCE:
        calls.insert(0, wait)
    else:
        calls.insert(len(calls) - 1, wait)
    return ReductionPolicy(policy.key, tuple(calls), policy.origin)


def identity_policy(action: ActionDescription, primitives: PrimitiveSet) -> Optional[ReductionPolicy]:
    """Single primitive call when the action's verb names a primitive."""
    schema = primitives.for_verb(lemma_verb(action.verb))
    if schema is None:
        return None
    values = []
    if schema.name == WAIT:
        if action.time is not None:
            values.append(normalize_condition(action.time.payload))
    for value in (action.what, action.where_, action.how):
        if value:
            words = value.split()
            if value is action.where_ and len(words) > 1:
                words = words[1:]
            cleaned = _clean_arg(strip_determiners(" ".join(words)))
            if cleaned:
                values.append(cleaned)
    args = tuple(values[:schema.arity])
    args += tuple(schema.param_roles[len(args):schema.arity])
    return ReductionPolicy(schema.name.lower(), (PrimitiveCall(schema.name, args),), Origin.IDENTITY)


@dataclass
class Reducer:
    """Bundles the library, primitive set, LLM client and exemplars."""

    lib: ActionLibrary
    primitives: PrimitiveSet
    client: LLMClient
    exemplars: list[Exemplar] = field(default_factory=load_exemplars)
    key_granularity: str = "verb+noun"
    max_tokens: int = 256

    def _ask(self, action: ActionDescription, key: str) -> ReductionOutcome:
        prompt = build_prompt(action, self.lib, self.primitives, self.exemplars)
        resp = self.client.complete(CompletionRequest(prompt.render(), max_tokens=self.max_tokens))
        return parse_llm_plan(resp.text, self.primitives, self.lib, key)

    def reduce(self, action: ActionDescription, mode: AblationMode) -> ReductionOutcome:
        mode = AblationMode(mode)
        key = cache_key(action, self.key_granularity)
        if mode is not AblationMode.AR_STAR:
            ident = identity_policy(action, self.primitives)
            if ident is not None:
                return ReductionOutcome(ident, (), 1.0, False, 1)
        if mode is not AblationMode.AR_LIB:
            out = self._ask(action, key)
        else:
            fresh: list[ReductionOutcome] = []

            def compute() -> ReductionPolicy:
                fresh.append(self._ask(action, key))
                return fresh[0].policy

            policy, computed = self.lib.get_or_compute(key, compute)
            if computed:
                out = fresh[0]
            else:
                out = ReductionOutcome(policy, (), 1.0, False, len(policy.calls))
        policy = apply_wait(out.policy, action)
        if policy is out.policy:
            return out
        fraction = len(policy.calls) / (len(policy.calls) + len(out.rejected_lines))
        return ReductionOutcome(policy, out.rejected_lines, fraction, out.llm_called, out.parsed_calls)


def reduce(action: ActionDescription, lib: ActionLibrary, primitives: PrimitiveSet, client: LLMClient,
           mode: AblationMode) -> ReductionOutcome:
    return Reducer(lib, primitives, client).reduce(action, mode)
