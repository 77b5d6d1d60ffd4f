"""Cue-word lexicon, tokenizer and lemmatizer shared by the text front end."""

from __future__ import annotations

import functools
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .core import Sequencer, TimeKind, TimeSpec

_TOKEN = re.compile(r"\d+(?:[./]\d+)*(?:°?[FfCc]\b)?|\w+(?:['’]\w+)*(?:-\w+)*|[^\w\s]")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int

    @property
    def lower(self) -> str:
        return self.text.lower()

    @property
    def is_word(self) -> bool:
        return self.text[0].isalpha()

    @property
    def is_number(self) -> bool:
        return self.text[0].isdigit()


def tokenize(text: str) -> list[Token]:
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN.finditer(text)]


@dataclass(frozen=True)
class CategoryLexicon:
    verbs: frozenset[str]
    irregular_verbs: dict
    sequencers: dict
    time_units: frozenset[str]
    temporal_adverbs: frozenset[str]
    duration_modifiers: frozenset[str]
    heat_cues: tuple[str, ...]
    heat_levels: frozenset[str]
    prepositions: frozenset[str]
    where_prepositions: frozenset[str]
    determiners: frozenset[str]
    pronouns: frozenset[str]
    conjunctions: frozenset[str]
    negations: frozenset[str]
    discourse_markers: frozenset[str]
    adverbs: frozenset[str]
    manner_adjectives: frozenset[str]
    particles: frozenset[str]
    units: frozenset[str]

    @classmethod
    def from_dict(cls, data: dict) -> "CategoryLexicon":
        if data.get("schema_version", 1) != 1:
            raise ValueError(f"unsupported lexicon schema {data.get('schema_version')!r}")
        sets = {k: frozenset(w.lower() for w in data.get(k, ())) for k in (
            "verbs", "time_units", "temporal_adverbs", "duration_modifiers", "heat_levels", "prepositions",
            "where_prepositions", "determiners", "pronouns", "conjunctions", "negations", "discourse_markers",
            "adverbs", "manner_adjectives", "particles", "units")}
        # longest cue first so "medium-high heat" wins over "high heat"
        heat = tuple(sorted((c.lower() for c in data.get("heat_cues", ())), key=len, reverse=True))
        return cls(irregular_verbs=dict(data.get("irregular_verbs", {})),
                   sequencers={k.lower(): v for k, v in data.get("sequencers", {}).items()},
                   heat_cues=heat, **sets)

    @property
    def closed_class(self) -> frozenset[str]:
        return (self.prepositions | self.determiners | self.pronouns | self.conjunctions
                | self.negations | self.time_units | frozenset({"do", "don't", "dont", "is", "are", "be"}))

    def is_adverb(self, word: str) -> bool:
        w = word.lower()
        return w in self.adverbs or (len(w) > 4 and w.endswith("ly") and w not in {"only", "jelly", "belly", "apply", "chilly"})

    def is_verb(self, word: str) -> bool:
        return lemma_verb(word, self) in self.verbs


def load_lexicon(path: str | Path) -> CategoryLexicon:
    return CategoryLexicon.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@functools.lru_cache(maxsize=1)
def default_lexicon() -> CategoryLexicon:
    text = resources.files("cook2ltl.data").joinpath("lexicon.json").read_text(encoding="utf-8")
    return CategoryLexicon.from_dict(json.loads(text))


_NO_UNDOUBLE = ("ll", "ss", "ff", "zz")
_VOWELS = set("aeiou")


def lemma_verb(word: str, lexicon: Optional[CategoryLexicon] = None) -> str:
    """Lowercase base form via an irregular table and s/es/ed/ing stripping."""
    lex = lexicon or default_lexicon()
    w = word.lower().strip()
    if w in lex.verbs:
        return w
    if w in lex.irregular_verbs:
        return lex.irregular_verbs[w]
    for suffix in ("ing", "ed", "es", "s"):
        if not w.endswith(suffix) or len(w) - len(suffix) < 2:
            continue
        if suffix == "s" and w.endswith(("ss", "us", "is")):
            continue
        stem = w[: -len(suffix)]
        candidates = [stem]
        if suffix in ("ing", "ed"):
            if len(stem) > 2 and stem[-1] == stem[-2] and stem[-2:] not in _NO_UNDOUBLE:
                candidates.insert(0, stem[:-1])
            candidates.append(stem + "e")
            if suffix == "ed" and stem.endswith("i"):
                candidates.append(stem[:-1] + "y")
        if suffix == "es":
            if stem.endswith("i"):
                candidates.append(stem[:-1] + "y")
            candidates.append(stem + "e")
        for c in candidates:
            if c in lex.verbs:
                return c
        if suffix == "es" and not stem.endswith(("ch", "sh", "x", "z", "ss", "o")):
            return w[:-1]
        if suffix in ("ing", "ed"):
            if len(stem) > 2 and stem[-1] == stem[-2] and stem[-2:] not in _NO_UNDOUBLE:
                return stem[:-1]
            # consonant-vowel-consonant stems usually dropped a silent e (bake -> baking)
            if len(stem) >= 3 and stem[-1] not in _VOWELS | {"w", "x", "y"} and stem[-2] in _VOWELS and stem[-3] not in _VOWELS:
                return stem + "e"
        return stem
    return w


_IRREGULAR_NOUNS = {"leaves": "leaf", "halves": "half", "loaves": "loaf", "knives": "knife", "shelves": "shelf",
                    "children": "child", "geese": "goose", "mice": "mouse", "teeth": "tooth", "feet": "foot"}


def lemma_noun(word: str) -> str:
    w = word.lower()
    if w in _IRREGULAR_NOUNS:
        return _IRREGULAR_NOUNS[w]
    if len(w) <= 3 or w.endswith(("ss", "us", "is")):
        return w
    if w.endswith("ies"):
        return w[:-3] + "y"
    if w.endswith("oes"):
        return w[:-2]
    if w.endswith(("ches", "shes", "xes", "sses", "zes")):
        return w[:-2]
    if w.endswith("s"):
        return w[:-1]
    return w


def strip_determiners(phrase: str, lexicon: Optional[CategoryLexicon] = None) -> str:
    """Drop leading articles, quantities, units and ``of`` from a noun phrase."""
    lex = lexicon or default_lexicon()
    words = phrase.split()
    if "of" in [w.lower() for w in words[:-1]]:
        idx = max(i for i, w in enumerate(words[:-1]) if w.lower() == "of")
        head = [w for w in words[:idx] if w.lower() not in lex.determiners and not w[0].isdigit() and w.lower() not in lex.units]
        if not head:
            words = words[idx + 1:]
    while words and (words[0].lower() in lex.determiners or words[0][0].isdigit() or words[0].lower() in lex.units):
        words = words[1:]
    return " ".join(words)


def strip_articles(phrase: str) -> str:
    words = [w for w in phrase.split() if w.lower() not in {"the", "a", "an"}]
    return " ".join(words)


def head_noun(phrase: str, lexicon: Optional[CategoryLexicon] = None) -> str:
    """Lemmatized head of a noun phrase: last word after any ``of``."""
    core = strip_determiners(phrase, lexicon)
    words = [w for w in re.findall(r"[A-Za-z][A-Za-z'-]*", core)]
    lowered = [w.lower() for w in words]
    if "of" in lowered[:-1]:
        words = words[lowered.index("of") + 1:]
    if not words:
        return ""
    return lemma_noun(words[-1])


def identifier(text: str) -> str:
    """snake_case identifier for prompt signatures and condition atoms."""
    words = re.findall(r"[A-Za-z0-9]+", strip_articles(text).lower())
    ident = "_".join(words)
    if ident and ident[0].isdigit():
        ident = "_" + ident
    return ident


_COPULAS = {"is", "are", "be", "becomes", "become", "gets", "get", "turns", "turn", "has", "have", "been"}
_CONDITION_ALIASES = {"boils": "boiling", "boil": "boiling", "melts": "melted", "melt": "melted",
                      "softens": "softened", "soften": "softened", "browns": "brown"}


def normalize_condition(text: str) -> str:
    """Condition phrase to the snake_case atom the simulator can assert.

    >>> normalize_condition("the water is boiling")
    'water_boiling'
    """
    words = re.findall(r"[A-Za-z0-9]+", text.lower())
    kept = [_CONDITION_ALIASES.get(w, w) for w in words if w not in {"the", "a", "an"} and w not in _COPULAS]
    return "_".join(kept)


def find_sequencer(tokens: list[Token], i: int, lexicon: CategoryLexicon) -> Optional[tuple[str, int]]:
    """Longest sequencer cue starting at token ``i``: (sequencer, token count)."""
    best = None
    for cue, seq in lexicon.sequencers.items():
        parts = cue.split()
        n = len(parts)
        if i + n <= len(tokens) and [t.lower for t in tokens[i:i + n]] == parts:
            if best is None or n > best[1]:
                best = (seq, n)
    return best


def parse_time(raw: str, lexicon: Optional[CategoryLexicon] = None) -> TimeSpec:
    """Classify a Time chunk as a duration or a sequenced condition."""
    lex = lexicon or default_lexicon()
    tokens = tokenize(raw)
    for i, _ in enumerate(tokens):
        hit = find_sequencer(tokens, i, lex)
        if hit:
            seq, n = hit
            payload = raw[tokens[i + n - 1].end:].strip() if i + n < len(tokens) else ""
            if payload:
                return TimeSpec(raw=raw, kind=TimeKind.CONDITION, sequencer=Sequencer(seq), payload=payload)
            break
    payload = raw.strip()
    if tokens and tokens[0].lower == "for":
        payload = raw[tokens[0].end:].strip()
    return TimeSpec(raw=raw, kind=TimeKind.DURATION, sequencer=None, payload=payload)
