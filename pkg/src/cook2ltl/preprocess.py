"""Sentence segmentation and carry-forward filling of omitted direct objects."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .core import InstructionStep, Provenance, Recipe, SalientCategory
from .lexicon import CategoryLexicon, default_lexicon, find_sequencer, strip_determiners, tokenize

_ABBREVIATIONS = {"approx", "min", "mins", "hr", "hrs", "tsp", "tbsp", "oz", "lb", "lbs", "pkg", "qt", "pt",
                  "sec", "secs", "no", "vs", "etc", "e.g", "i.e", "deg", "temp", "c", "doz"}
_LIST_MARKER = re.compile(r"^\s*(?:\d+|[a-zA-Z])[.)]\s+")


def segment_steps(raw: str, start_index: int = 1) -> list[InstructionStep]:
    """Split text into one step per sentence.

    Terminators are ``.``, ``!`` and ``;`` outside parentheses. A period is
    not a boundary inside a decimal (``1.5``), after a leading list marker
    (``1.``), or after a known abbreviation followed by a lowercase word.
    """
    sentences: list[str] = []
    buf: list[str] = []
    depth = 0
    text = raw.strip()
    n = len(text)
    i = 0
    while i < n:
        ch = text[i]
        buf.append(ch)
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        elif ch in ".!;" and depth == 0 and _is_boundary(text, i, "".join(buf)):
            sentences.append("".join(buf))
            buf = []
        i += 1
    sentences.append("".join(buf))
    steps = []
    for s in sentences:
        s = _LIST_MARKER.sub("", s).strip()
        if s.endswith(";"):
            s = s[:-1].rstrip() + "."
        if not s or not any(ch.isalnum() for ch in s):
            continue
        steps.append(InstructionStep(start_index + len(steps), s))
    return steps


def _is_boundary(text: str, i: int, current: str) -> bool:
    ch = text[i]
    if ch != ".":
        return True
    prev = text[i - 1] if i > 0 else ""
    nxt = text[i + 1] if i + 1 < len(text) else ""
    if prev.isdigit() and nxt.isdigit():
        return False
    if _LIST_MARKER.match(current + " ") and len(current.strip()) <= 3:
        return False
    word = re.search(r"([A-Za-z.]+)\.$", current)
    if word and word.group(1).lower() in _ABBREVIATIONS:
        rest = text[i + 1:].lstrip()
        if rest and rest[0].islower():
            return False
    return True


def segment_recipe(recipe: Recipe) -> list[InstructionStep]:
    """All sentences of a recipe, renumbered contiguously from 1."""
    steps: list[InstructionStep] = []
    for step in recipe.steps:
        steps.extend(segment_steps(step.text, start_index=len(steps) + 1))
    return steps


@dataclass
class FocusStack:
    """Recently mentioned entities, most recent first."""

    depth: int = 8
    entries: list[tuple[str, int, SalientCategory]] = field(default_factory=list)

    def push(self, entity: str, step_index: int, role: SalientCategory):
        entity = entity.strip()
        if not entity:
            return
        self.entries = [e for e in self.entries if e[0].lower() != entity.lower()]
        self.entries.insert(0, (entity, step_index, role))
        del self.entries[self.depth:]

    def top(self) -> Optional[str]:
        return self.entries[0][0] if self.entries else None

    def __len__(self) -> int:
        return len(self.entries)


def _object_missing(text: str, verb_end: int, lexicon: CategoryLexicon) -> bool:
    toks = tokenize(text[verb_end:])
    if not toks:
        return True
    first = toks[0].lower
    if first in {".", "!", ";", ",", "?"}:
        return True
    if first in lexicon.prepositions or lexicon.is_adverb(first) or first in lexicon.manner_adjectives:
        return True
    if find_sequencer(toks, 0, lexicon) or first in lexicon.temporal_adverbs or toks[0].is_number:
        return True
    return False


def resolve_zero_anaphora(steps: Iterable[InstructionStep], stack: Optional[FocusStack] = None,
                          lexicon: Optional[CategoryLexicon] = None) -> list[InstructionStep]:
    """Insert the most recently mentioned entity after a head verb that has
    no direct object. Steps with nothing to insert are flagged unresolved."""
    from .semantic_parser import parse_step

    lex = lexicon or default_lexicon()
    stack = stack if stack is not None else FocusStack()
    out: list[InstructionStep] = []
    for step in steps:
        parsed = parse_step(step, lex)
        text, unresolved = step.text, False
        verbs = [c for c in parsed.chunks if c.category is SalientCategory.VERB]
        if parsed.actions and verbs and parsed.actions[0].what is None and _object_missing(text, verbs[0].span[1], lex):
            entity = stack.top()
            if entity is None:
                unresolved = True
            else:
                cut = verbs[0].span[1]
                text = f"{text[:cut]} the {entity}{text[cut:]}"
                parsed = parse_step(replace(step, text=text), lex)
        for action in parsed.actions[:1]:
            if action.where_:
                words = action.where_.split(maxsplit=1)
                if len(words) == 2 and words[0].lower() in lex.prepositions:
                    stack.push(strip_determiners(words[1], lex), step.index, SalientCategory.WHERE)
            if action.what:
                stack.push(strip_determiners(action.what, lex), step.index, SalientCategory.WHAT)
        out.append(InstructionStep(step.index, text, Provenance.PREPROCESSED, unresolved))
    return out


def preprocess_recipe(recipe: Recipe, lexicon: Optional[CategoryLexicon] = None) -> list[InstructionStep]:
    return resolve_zero_anaphora(segment_recipe(recipe), FocusStack(), lexicon)
