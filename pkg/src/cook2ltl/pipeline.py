"""End-to-end translation: recipe text to an LTL formula over primitive calls."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .action_library import ActionLibrary
from .action_reduction import Reducer, ReductionOutcome
from .core import (AblationMode, ActionDescription, InstructionStep, PrimitiveCall, PrimitiveSet, Recipe,
                   default_primitive_set)
from .lexicon import CategoryLexicon, default_lexicon, lemma_verb, strip_determiners
from .llm_client import LLMClient, MeteredClient, UsageMeter
from .ltl import TRUE, Formula, translate
from .preprocess import FocusStack, preprocess_recipe, resolve_zero_anaphora, segment_steps
from .semantic_parser import ConnectiveLink, parse_step


@dataclass(frozen=True)
class _HighLevel:
    calls: tuple[PrimitiveCall, ...]


def high_level_call(action: ActionDescription) -> PrimitiveCall:
    """The unreduced action as a single atom, e.g. ``boil(eggs)``."""
    args = []
    if action.what:
        arg = re.sub(r"[(),]", " ", strip_determiners(action.what)).lower()
        if arg.split():
            args.append(" ".join(arg.split()))
    return PrimitiveCall(lemma_verb(action.verb), tuple(args))


@dataclass
class StepTranslation:
    step: InstructionStep
    actions: list[ActionDescription]
    links: list[ConnectiveLink]
    outcomes: list[ReductionOutcome]
    initial: Formula
    formula: Formula
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class RecipeTranslation:
    recipe_id: str
    steps: list[StepTranslation]
    formula: Formula

    @property
    def outcomes(self) -> list[ReductionOutcome]:
        return [o for s in self.steps for o in s.outcomes]


def _shift(links: Iterable[ConnectiveLink], offset: int) -> list[ConnectiveLink]:
    return [replace(l, left=l.left + offset, right=None if l.right is None else l.right + offset) for l in links]


class Cook2LTL:
    """Preprocess, parse, reduce and translate instruction steps.

    Usage is metered through ``self.meter``; the library is shared across
    calls so AR_LIB runs accumulate cached policies.
    """

    def __init__(self, client: LLMClient, mode: AblationMode = AblationMode.AR_LIB,
                 library: Optional[ActionLibrary] = None, primitives: Optional[PrimitiveSet] = None,
                 lexicon: Optional[CategoryLexicon] = None, key_granularity: str = "verb+noun"):
        self.primitives = primitives or default_primitive_set()
        self.mode = AblationMode(mode)
        self.library = library if library is not None else ActionLibrary.seeded(self.primitives)
        self.lexicon = lexicon or default_lexicon()
        self.meter = UsageMeter()
        self.client = MeteredClient(client, self.meter)
        # AR_STAR and AR never grow the shared library
        lib = self.library if self.mode is AblationMode.AR_LIB else ActionLibrary.seeded(self.primitives)
        self.reducer = Reducer(lib, self.primitives, self.client, key_granularity=key_granularity)

    def translate_step(self, step: InstructionStep) -> StepTranslation:
        parsed = parse_step(step, self.lexicon)
        actions = list(parsed.actions)
        links = list(parsed.connectives)
        initial = translate([_HighLevel((high_level_call(a),)) for a in actions], links) if actions else TRUE
        outcomes = [self.reducer.reduce(a, self.mode) for a in actions]
        formula = translate(outcomes, links) if outcomes else TRUE
        return StepTranslation(step, actions, links, outcomes, initial, formula, list(parsed.diagnostics))

    def translate_steps(self, steps: Sequence[InstructionStep], recipe_id: str = "") -> RecipeTranslation:
        results = [self.translate_step(s) for s in steps]
        outcomes: list[ReductionOutcome] = []
        links: list[ConnectiveLink] = []
        for r in results:
            links.extend(_shift(r.links, len(outcomes)))
            outcomes.extend(r.outcomes)
        formula = translate(outcomes, links) if outcomes else TRUE
        return RecipeTranslation(recipe_id, results, formula)

    def translate_recipe(self, recipe: Recipe) -> RecipeTranslation:
        return self.translate_steps(preprocess_recipe(recipe, self.lexicon), recipe.id)

    def translate_text(self, text: str) -> RecipeTranslation:
        steps = resolve_zero_anaphora(segment_steps(text), FocusStack(), self.lexicon)
        return self.translate_steps(steps)

