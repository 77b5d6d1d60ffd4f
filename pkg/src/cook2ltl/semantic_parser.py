"""Rule-based salient-category tagger plus a standoff-annotation front end.

Both front ends produce a :class:`ParseResult` with the same ordering
contract: actions sorted by the position of their verb chunk, chunks sorted
by span, connectives referencing action ordinals.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import ActionDescription, Chunk, InstructionStep, SalientCategory, TimeKind
from .lexicon import (CategoryLexicon, Token, default_lexicon, find_sequencer, lemma_verb, parse_time,
                      tokenize)

C = SalientCategory


class ConnectiveKind(str, enum.Enum):
    AND = "and"
    OR = "or"
    NOT = "not"


@dataclass(frozen=True)
class ConnectiveLink:
    kind: ConnectiveKind
    left: int
    right: Optional[int] = None

    def __post_init__(self):
        if self.kind is ConnectiveKind.NOT:
            if self.right is not None:
                raise ValueError("not-link takes a single ordinal")
        elif self.right is None or not self.left < self.right:
            raise ValueError(f"{self.kind.value}-link needs left < right, got {self.left}, {self.right}")


@dataclass(frozen=True)
class ParseResult:
    actions: tuple[ActionDescription, ...] = ()
    connectives: tuple[ConnectiveLink, ...] = ()
    chunks: tuple[Chunk, ...] = ()
    diagnostics: tuple[str, ...] = ()


class AnnotationError(ValueError):
    pass


_SENTENCE_END = {".", "!", "?", ";"}
_NEG_SINGLE = {"don't", "dont", "never", "don’t"}


@dataclass
class _Action:
    verb: Chunk
    gerund: bool = False
    chunks: list[Chunk] = field(default_factory=list)


class _Tagger:
    """One pass over the tokens of a step; see :func:`parse_step`."""

    def __init__(self, text: str, lexicon: CategoryLexicon):
        self.text = text
        self.lex = lexicon
        self.toks = tokenize(text)
        self.reserved: dict[int, tuple[C, int]] = {}  # start token -> (category, end token exclusive)
        self.skip: set[int] = set()
        self.actions: list[_Action] = []
        self.leading: list[Chunk] = []

    # -- helpers -------------------------------------------------------
    def chunk(self, cat: C, i: int, j: int) -> Chunk:
        start, end = self.toks[i].start, self.toks[j - 1].end
        return Chunk(cat, self.text[start:end], (start, end))

    def low(self, i: int) -> str:
        return self.toks[i].lower if i < len(self.toks) else ""

    def covered(self, i: int) -> bool:
        return any(s <= i < e for s, (_, e) in self.reserved.items())

    def reserve(self, cat: C, i: int, j: int):
        if j > i and not any(self.covered(k) for k in range(i, j)):
            self.reserved[i] = (cat, j)

    def next_word(self, i: int) -> int:
        while i < len(self.toks) and (self.low(i) in self.lex.discourse_markers - {"and", "or"} or self.lex.is_adverb(self.low(i))):
            i += 1
        return i

    def verbish(self, i: int) -> bool:
        if i >= len(self.toks) or i in self.reserved or not self.toks[i].is_word:
            return False
        w = self.low(i)
        if w in self.lex.closed_class:
            return False
        return self.lex.is_verb(w)

    # -- reserved spans: temperature and time -------------------------
    def mark_temperatures(self):
        toks, lex = self.toks, self.lex
        i = 0
        while i < len(toks):
            w = self.low(i)
            end = None
            if toks[i].is_number and re.search(r"[FfCc]$", toks[i].text):
                end = i + 1
            elif toks[i].is_number and self.low(i + 1) in {"°", "degrees", "degree", "deg"}:
                end = i + 2
                if self.low(end) in {"f", "c", "fahrenheit", "celsius"}:
                    end += 1
                elif self.low(end) == "°" and self.low(end + 1) in {"f", "c"}:
                    end += 2
            elif w in lex.heat_levels and i > 0 and self.low(i - 1) in {"on", "over", "at"}:
                end = i + 1
                if self.low(end) in {"heat", "flame", "power"}:
                    end += 1
            else:
                for cue in lex.heat_cues:
                    parts = cue.split()
                    if [self.low(k) for k in range(i, i + len(parts))] == parts:
                        end = i + len(parts)
                        break
            if end is None:
                i += 1
                continue
            self.reserve(C.TEMPERATURE, i, end)
            if i > 0 and self.low(i - 1) in {"to", "at", "over", "on", "in"}:
                self.skip.add(i - 1)
            i = end

    def mark_times(self):
        toks, lex = self.toks, self.lex
        i = 0
        while i < len(toks):
            if self.covered(i) or i in self.skip:
                i += 1
                continue
            hit = find_sequencer(toks, i, lex)
            if hit and i + hit[1] < len(toks) and self.low(i + hit[1]) not in _SENTENCE_END | {","}:
                j = i + hit[1]
                while j < len(toks) and self.low(j) not in _SENTENCE_END | {","} and not self.covered(j):
                    if self.low(j) == "then":
                        break
                    j += 1
                self.reserve(C.TIME, i, j)
                i = j
                continue
            w = self.low(i)
            if w in lex.time_units and i > 0 and (toks[i - 1].is_number or self.low(i - 1) in lex.duration_modifiers):
                s = i
                while s > 0 and (toks[s - 1].is_number or self.low(s - 1) in lex.duration_modifiers) and not self.covered(s - 1):
                    s -= 1
                while s < i and self.low(s) in {"to", "or", "-"}:
                    s += 1
                self.reserve(C.TIME, s, i + 1)
            elif w in lex.temporal_adverbs and w not in lex.discourse_markers:
                self.reserve(C.TIME, i, i + 1)
            i += 1

    # -- noun phrases --------------------------------------------------
    def np_end(self, i: int) -> int:
        """Exclusive end of the noun phrase starting at token ``i``."""
        lex = self.lex
        j = i
        while j < len(self.toks):
            if j in self.reserved or self.covered(j) or j in self.skip:
                break
            t = self.toks[j]
            w = t.lower
            if w in _SENTENCE_END or w == "then":
                break
            if w in {",", "and", "or", "&"}:
                k = j + 1
                if w == "," and self.low(k) in {"and", "or"}:
                    k += 1
                if j == i or k >= len(self.toks) or self.verbish(self.next_word(k)) or not self.toks[k].is_word and not self.toks[k].is_number:
                    break
                if self.low(k) in lex.prepositions or k in self.reserved or self.low(k) in lex.negations:
                    break
                j = k
                continue
            if w in lex.prepositions and w != "of":
                break
            if w == "of" and j == i:
                break
            if lex.is_adverb(w) and not (self.low(j + 1).endswith("ed") and j + 1 < len(self.toks)):
                break
            if w in lex.manner_adjectives and j == i:
                break
            if not (t.is_word or t.is_number or w in {"-", "/", "'"}):
                break
            j += 1
        while j > i and self.low(j - 1) in {"-", "/", "of"}:
            j -= 1
        return j

    # -- main pass -----------------------------------------------------
    def attach(self, chunk: Chunk):
        target = self.actions[-1].chunks if self.current is not None else self.leading
        if target and chunk.category is C.WHERE and target[-1].category is C.WHERE and \
                self.text[target[-1].span[1]:chunk.span[0]].strip() == "":
            prev = target.pop()
            chunk = Chunk(C.WHERE, self.text[prev.span[0]:chunk.span[1]], (prev.span[0], chunk.span[1]))
        target.append(chunk)

    def extend_last(self, end_char: int) -> bool:
        target = self.actions[-1].chunks if self.current is not None else self.leading
        if not target:
            return False
        prev = target.pop()
        target.append(Chunk(prev.category, self.text[prev.span[0]:end_char], (prev.span[0], end_char)))
        return True

    def run(self):
        self.mark_temperatures()
        self.mark_times()
        toks, lex = self.toks, self.lex
        self.current: Optional[_Action] = None
        sentence_has_verb = False
        expect_verb = True
        pre_how: list[int] = []
        i = 0
        while i < len(toks):
            if i in self.reserved:
                cat, end = self.reserved[i]
                self.attach(self.chunk(cat, i, end))
                i = end
                continue
            if i in self.skip:
                i += 1
                continue
            w = self.low(i)
            if w in _SENTENCE_END:
                sentence_has_verb, expect_verb, self.current, pre_how = False, True, None, []
                self.leading = []
                i += 1
                continue
            if w in {",", "then"}:
                expect_verb = True
                i += 1
                continue
            if w in {"and", "or"}:
                if self.verbish(self.next_word(i + 1)) or self.gerund_at(self.next_word(i + 1)):
                    expect_verb = True
                i += 1
                continue
            if w in _NEG_SINGLE or (w == "do" and self.low(i + 1) == "not"):
                expect_verb = True
                i += 2 if w == "do" else 1
                continue
            if expect_verb:
                if self.gerund_at(i):
                    self.start_action(i, gerund=True)
                    expect_verb = False
                    i += 1
                    continue
                is_verb = self.verbish(i) or (
                    not sentence_has_verb and toks[i].is_word and w not in lex.closed_class
                    and w not in lex.discourse_markers and not lex.is_adverb(w) and w not in {"while", "by"})
                if is_verb:
                    j = self.start_action(i, gerund=False, pre_how=pre_how)
                    pre_how = []
                    sentence_has_verb = True
                    expect_verb = False
                    i = j
                    continue
                if w in lex.discourse_markers or w in {"while", "by"}:
                    i += 1
                    continue
                if lex.is_adverb(w) and not sentence_has_verb:
                    pre_how.append(i)
                    i += 1
                    continue
                expect_verb = False
                if self.current is not None and toks[i].is_word and w not in lex.prepositions:
                    j = self.extend_after_list(i)
                    if j is not None:
                        i = j
                        continue
            i = self.argument(i)

    def extend_after_list(self, i: int) -> Optional[int]:
        """Continue a What list across a comma (``salt, pepper and garlic``)."""
        chunks = self.actions[-1].chunks
        if not chunks or chunks[-1].category is not C.WHAT:
            return None
        j = self.np_end(i)
        if j == i:
            return None
        self.extend_last(self.toks[j - 1].end)
        return j

    def gerund_at(self, i: int) -> bool:
        if i >= len(self.toks) or i in self.reserved or self.covered(i):
            return False
        w = self.low(i)
        return w.endswith("ing") and len(w) > 4 and lemma_verb(w, self.lex) in self.lex.verbs

    def start_action(self, i: int, gerund: bool, pre_how: Sequence[int] = ()) -> int:
        j = i + 1
        if not gerund and self.low(j) in self.lex.particles - self.lex.where_prepositions and \
                j + 1 < len(self.toks) and (self.toks[j + 1].is_word or self.toks[j + 1].is_number) and \
                self.low(j + 1) not in self.lex.prepositions:
            j += 1
        action = _Action(self.chunk(C.VERB, i, j), gerund=gerund)
        for k in pre_how:
            action.chunks.append(self.chunk(C.HOW, k, k + 1))
        if not gerund and self.leading:
            action.chunks.extend(self.leading)
            self.leading = []
        self.actions.append(action)
        self.current = action
        return j

    def argument(self, i: int) -> int:
        """Consume one argument chunk of the current action; returns next index."""
        lex, toks = self.lex, self.toks
        w = self.low(i)
        if not toks[i].is_word and not toks[i].is_number:
            return i + 1
        if w in lex.where_prepositions or w == "with":
            j = self.np_end(i + 1)
            if j == i + 1:
                return i + 1
            self.attach(self.chunk(C.WHERE if w != "with" else C.HOW, i, j))
            return j
        if w in lex.prepositions:
            j = self.np_end(i + 1)
            if j > i + 1:
                self.extend_last(toks[j - 1].end)
            return max(j, i + 1)
        if lex.is_adverb(w) or w in lex.manner_adjectives:
            j = i + 1
            while j < len(toks) and j not in self.reserved and lex.is_adverb(self.low(j)):
                j += 1
            target = self.actions[-1].chunks if self.current is not None else self.leading
            if target and target[-1].category is C.HOW and self.text[target[-1].span[1]:toks[i].start].strip() == "":
                self.extend_last(toks[j - 1].end)
            else:
                self.attach(self.chunk(C.HOW, i, j))
            return j
        j = self.np_end(i)
        if j == i:
            return i + 1
        target = self.actions[-1].chunks if self.current is not None else self.leading
        if self.current is not None and not any(c.category is C.WHAT for c in target):
            self.attach(self.chunk(C.WHAT, i, j))
        elif target:
            self.extend_last(toks[j - 1].end)
        return j


def _assemble(text: str, groups: Sequence[tuple[Chunk, Sequence[Chunk]]], source_step: int,
              lexicon: CategoryLexicon) -> list[ActionDescription]:
    actions = []
    for ordinal, (verb, chunks) in enumerate(groups):
        by_cat: dict[C, list[Chunk]] = {}
        for c in sorted(chunks, key=lambda c: c.span):
            by_cat.setdefault(c.category, []).append(c)
        time = None
        times = [parse_time(c.text, lexicon) for c in by_cat.get(C.TIME, [])]
        if times:
            conditions = [t for t in times if t.kind is TimeKind.CONDITION]
            time = conditions[0] if conditions else times[0]
        first = lambda cat: by_cat[cat][0].text if cat in by_cat else None  # noqa: E731
        how = " ".join(c.text for c in by_cat.get(C.HOW, [])) or None
        verb_word = verb.text.split()[0]
        actions.append(ActionDescription(
            verb=lemma_verb(verb_word, lexicon), what=first(C.WHAT), where_=first(C.WHERE), how=how,
            time=time, temperature=first(C.TEMPERATURE), source_step=source_step, ordinal_in_step=ordinal))
    return actions


def _negated(text: str, verb_start: int, lexicon: CategoryLexicon) -> bool:
    toks = [t for t in tokenize(text[:verb_start])]
    while toks and (toks[-1].lower in lexicon.discourse_markers - {"and", "or"} or lexicon.is_adverb(toks[-1].lower)):
        toks.pop()
    if not toks:
        return False
    last = toks[-1].lower
    return last in _NEG_SINGLE or (last == "not" and len(toks) > 1 and toks[-2].lower == "do")


def _links(text: str, verbs: Sequence[Chunk], gerund: Sequence[bool], lexicon: CategoryLexicon) -> list[ConnectiveLink]:
    links: list[ConnectiveLink] = []
    prev_main: Optional[int] = None
    for k, verb in enumerate(verbs):
        if _negated(text, verb.span[0], lexicon):
            links.append(ConnectiveLink(ConnectiveKind.NOT, k))
        if gerund[k]:
            continue
        if prev_main is not None:
            between = [t.lower for t in tokenize(text[verbs[prev_main].span[1]:verb.span[0]])]
            if not any(t in _SENTENCE_END for t in between):
                tail = between[-3:] if between else []
                if "or" in tail:
                    links.append(ConnectiveLink(ConnectiveKind.OR, prev_main, k))
                elif "and" in tail or "," in tail:
                    if "then" not in tail:
                        links.append(ConnectiveLink(ConnectiveKind.AND, prev_main, k))
        prev_main = k
    return links


def _share_objects(actions: list[ActionDescription], links: Sequence[ConnectiveLink],
                   groups: Sequence[tuple[Chunk, Sequence[Chunk]]]) -> list[ActionDescription]:
    """``Slice and toast the bread``: a bare verb coordinated with a verb that
    has an object shares that object."""
    from dataclasses import replace
    out = list(actions)
    for link in links:
        if link.kind is ConnectiveKind.NOT:
            continue
        left, right = out[link.left], out[link.right]
        if not groups[link.left][1] and left.what is None and right.what is not None:
            out[link.left] = replace(left, what=right.what)
    return out


def _analyze(step: InstructionStep, lexicon: CategoryLexicon) -> tuple[_Tagger, list[tuple[Chunk, list[Chunk]]]]:
    tagger = _Tagger(step.text, lexicon)
    tagger.run()
    return tagger, [(a.verb, a.chunks) for a in tagger.actions]


def parse_step(step: InstructionStep, lexicon: Optional[CategoryLexicon] = None) -> ParseResult:
    """Tag salient-category chunks and build one action per main verb and
    per actionable gerund."""
    lex = lexicon or default_lexicon()
    try:
        tagger, groups = _analyze(step, lex)
    except RecursionError:  # pragma: no cover - defensive
        return ParseResult(diagnostics=("tagger recursion limit",))
    if not groups:
        return ParseResult(diagnostics=(f"step {step.index}: no verb found in {step.text!r}",))
    actions = _assemble(step.text, groups, step.index, lex)
    links = _links(step.text, [g[0] for g in groups], [a.gerund for a in tagger.actions], lex)
    actions = _share_objects(actions, links, groups)
    chunks = sorted([c for verb, cs in groups for c in (verb, *cs)], key=lambda c: c.span)
    return ParseResult(tuple(actions), tuple(links), tuple(chunks))


def parse_connectives(step: InstructionStep, actions: Sequence[ActionDescription],
                      lexicon: Optional[CategoryLexicon] = None) -> list[ConnectiveLink]:
    lex = lexicon or default_lexicon()
    tagger, groups = _analyze(step, lex)
    if len(groups) != len(actions):
        raise ValueError(f"step {step.index}: {len(actions)} actions given but {len(groups)} verbs found")
    return _links(step.text, [g[0] for g in groups], [a.gerund for a in tagger.actions], lex)


_ANN_LINE = re.compile(r"^(T\d+)\t(\S+) (\d+) (\d+)\t(.*)$")


def load_standoff_annotations(ann_text: str, step_text: str, source_step: int = 1,
                              lexicon: Optional[CategoryLexicon] = None) -> ParseResult:
    """Build a ParseResult from brat-style entity lines over ``step_text``.

    Non-entity lines (relations, events, notes) are ignored; non-Verb chunks
    attach to the nearest preceding Verb, leading ones to the first Verb.
    """
    lex = lexicon or default_lexicon()
    chunks: list[Chunk] = []
    for lineno, line in enumerate(ann_text.splitlines(), start=1):
        if not line.strip() or line[0] in "REAMN#*":
            continue
        m = _ANN_LINE.match(line)
        if not m:
            raise AnnotationError(f"line {lineno}: malformed entity line {line!r}")
        _, label, start_s, end_s, surface = m.groups()
        try:
            category = SalientCategory.from_label(label)
        except ValueError:
            raise AnnotationError(f"line {lineno}: unknown category {label!r}") from None
        start, end = int(start_s), int(end_s)
        if not 0 <= start < end <= len(step_text):
            raise AnnotationError(f"line {lineno}: span ({start},{end}) outside text of length {len(step_text)}")
        if step_text[start:end] != surface:
            raise AnnotationError(f"line {lineno}: surface {surface!r} != text {step_text[start:end]!r}")
        chunks.append(Chunk(category, surface, (start, end)))
    chunks.sort(key=lambda c: c.span)
    for a, b in zip(chunks, chunks[1:]):
        if a.overlaps(b):
            raise AnnotationError(f"overlapping chunks {a.span} and {b.span}")
    verbs = [c for c in chunks if c.category is C.VERB]
    if not verbs:
        return ParseResult(chunks=tuple(chunks), diagnostics=("no Verb chunk in annotations",))
    groups: list[tuple[Chunk, list[Chunk]]] = [(v, []) for v in verbs]
    for c in chunks:
        if c.category is C.VERB:
            continue
        owner = 0
        for k, v in enumerate(verbs):
            if v.span[0] < c.span[0]:
                owner = k
        groups[owner][1].append(c)
    actions = _assemble(step_text, groups, source_step, lex)
    gerund = [v.text.lower().endswith("ing") and lemma_verb(v.text, lex) != v.text.lower() for v in verbs]
    links = _links(step_text, verbs, gerund, lex)
    return ParseResult(tuple(actions), tuple(links), tuple(chunks))
