"""LTL formulas over primitive-call atoms: construction from reduction
policies, ASCII parsing and printing, finite-trace evaluation, and the
inverse walk from a plan formula back to a call sequence.

Finite-trace conventions: at the end of the trace (no positions left) an
atom, ``F`` and ``U`` are false and ``G`` is vacuously true.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .core import PrimitiveCall
from .lexicon import normalize_condition


class Formula:
    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    prop: str

    def __repr__(self):
        return f"Atom({self.prop!r})"


@dataclass(frozen=True, repr=False)
class TrueConst(Formula):
    def __repr__(self):
        return "TrueConst()"


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Globally(Formula):
    sub: Formula


@dataclass(frozen=True)
class Finally(Formula):
    sub: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


TRUE = TrueConst()
Trace = Sequence[frozenset]


class LTLError(ValueError):
    pass


class FormulaSyntaxError(LTLError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class NonPlanFormula(LTLError):
    pass


def call_atom(call: PrimitiveCall) -> Atom:
    return Atom(call.render())


WAIT = "Wait"
BEFORE_MARKER = "before:"


def is_condition_atom(f: Formula) -> bool:
    return isinstance(f, Atom) and "(" not in f.prop


def atom_call(atom: Atom) -> PrimitiveCall:
    m = re.fullmatch(r"([A-Za-z_]\w*)\((.*)\)", atom.prop)
    if not m:
        raise LTLError(f"atom {atom.prop!r} is not a primitive call")
    body = m.group(2).strip()
    args = tuple(a.strip() for a in body.split(",")) if body else ()
    return PrimitiveCall(m.group(1), args)


# -- construction --------------------------------------------------------

def _chain(items: Sequence[Formula]) -> Formula:
    """x1 & F(x2 & F(... F(xn)))"""
    if not items:
        raise LTLError("sequenced visit needs at least one item")
    body = items[-1]
    for item in reversed(items[:-1]):
        body = And(item, Finally(body))
    return body


def sequenced_visit(items: Sequence[Formula]) -> Formula:
    """F(x1 & F(x2 & ... F(xn))): visit the items in order."""
    return Finally(_chain(list(items)))


def _policy_items(calls: Sequence[PrimitiveCall]) -> list[Formula]:
    """Spine items for one policy, rewriting Wait calls.

    ``Wait(c), a`` gives the item ``!a U c`` followed by ``a``; a trailing
    Wait (or one followed by another Wait) gives the bare condition ``c``;
    ``Wait(before:c)`` turns the preceding item ``a`` into ``!c U a``.
    """
    items: list[Formula] = []
    for k, call in enumerate(calls):
        if call.name != WAIT:
            items.append(call_atom(call))
            continue
        cond = call.args[0] if call.args else ""
        if cond.startswith(BEFORE_MARKER):
            cond_atom = Atom(normalize_condition(cond[len(BEFORE_MARKER):]))
            if not items or not isinstance(items[-1], Atom) or is_condition_atom(items[-1]):
                raise LTLError(f"before-Wait {call.render()} has no preceding action")
            items[-1] = Until(Not(cond_atom), items[-1])
            continue
        nxt = calls[k + 1] if k + 1 < len(calls) else None
        cond = normalize_condition(cond)
        if nxt is None or nxt.name == WAIT:
            items.append(Atom(cond))
        else:
            items.append(Until(Not(call_atom(nxt)), Atom(cond)))
    return items


def translate(policies: Sequence, links: Sequence = ()) -> Formula:
    """Plan formula for one step from ReductionPolicies (or outcomes
    carrying a ``policy``) and the step's connective links.

    Each action's calls become consecutive items of a single sequenced visit,
    so action i+1 is ordered after the last call of action i. An or-link
    replaces the linked actions by one disjunctive item, a not-link turns an
    action into a ``G(!...)`` constraint conjoined with the plan. And-links
    keep textual order.
    """
    from .semantic_parser import ConnectiveKind

    resolved = [p.policy if hasattr(p, "policy") else p for p in policies]
    n = len(resolved)
    for link in links:
        for ordinal in (link.left, link.right):
            if ordinal is not None and not 0 <= ordinal < n:
                raise LTLError(f"link {link} references missing action {ordinal}")
    negated = {l.left for l in links if l.kind is ConnectiveKind.NOT}
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for link in links:
        if link.kind is ConnectiveKind.OR and link.left not in negated and link.right not in negated:
            a, b = find(link.left), find(link.right)
            parent[max(a, b)] = min(a, b)

    items: list[Formula] = []
    constraints: list[Formula] = []
    done: set[int] = set()
    for i in range(n):
        if i in negated:
            constraints.append(Globally(Not(sequenced_visit(_policy_items(resolved[i].calls)))))
            continue
        if i in done:
            continue
        group = [j for j in range(n) if j not in negated and find(j) == find(i)]
        done.update(group)
        if len(group) == 1:
            items.extend(_policy_items(resolved[i].calls))
        else:
            branch = _chain(_policy_items(resolved[group[0]].calls))
            for j in group[1:]:
                branch = Or(branch, _chain(_policy_items(resolved[j].calls)))
            items.append(branch)
    parts: list[Formula] = [sequenced_visit(items)] if items else []
    parts.extend(constraints)
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def approximations(f: Formula) -> list[str]:
    """Notes for sub-formulas that only approximate the recipe text."""
    notes = []
    for node in walk(f):
        if isinstance(node, Until) and isinstance(node.left, Not) and is_condition_atom(node.left.sub) \
                and isinstance(node.right, Atom) and not is_condition_atom(node.right):
            notes.append(f"'{node.right.prop} before {node.left.sub.prop}' approximated as !c U a")
    return notes


def walk(f: Formula) -> Iterable[Formula]:
    yield f
    for child in children(f):
        yield from walk(child)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (Not, Globally, Finally)):
        return (f.sub,)
    if isinstance(f, (And, Or, Until)):
        return (f.left, f.right)
    return ()


def depth(f: Formula) -> int:
    return 1 + max((depth(c) for c in children(f)), default=0)


# -- evaluation ----------------------------------------------------------

def _vector(f: Formula, trace: Trace) -> list[bool]:
    """Truth of ``f`` at every position 0..len(trace); index len(trace) is the
    empty suffix."""
    n = len(trace)
    if isinstance(f, Atom):
        return [f.prop in trace[i] for i in range(n)] + [False]
    if isinstance(f, TrueConst):
        return [True] * (n + 1)
    if isinstance(f, Not):
        return [not v for v in _vector(f.sub, trace)]
    if isinstance(f, (And, Or)):
        a, b = _vector(f.left, trace), _vector(f.right, trace)
        if isinstance(f, And):
            return [x and y for x, y in zip(a, b)]
        return [x or y for x, y in zip(a, b)]
    if isinstance(f, Finally):
        sub = _vector(f.sub, trace)
        out = [False] * (n + 1)
        for i in range(n - 1, -1, -1):
            out[i] = sub[i] or out[i + 1]
        return out
    if isinstance(f, Globally):
        sub = _vector(f.sub, trace)
        out = [True] * (n + 1)
        for i in range(n - 1, -1, -1):
            out[i] = sub[i] and out[i + 1]
        return out
    if isinstance(f, Until):
        a, b = _vector(f.left, trace), _vector(f.right, trace)
        out = [False] * (n + 1)
        for i in range(n - 1, -1, -1):
            out[i] = b[i] or (a[i] and out[i + 1])
        return out
    raise TypeError(f"not a formula: {f!r}")


def evaluate(f: Formula, trace: Iterable[Iterable[str]]) -> bool:
    """Whether ``f`` holds at position 0 of the finite trace."""
    states = [s if isinstance(s, frozenset) else frozenset(s) for s in trace]
    return _vector(f, states)[0]


def execution_trace(calls: Sequence[PrimitiveCall]) -> list[frozenset]:
    """One state per executed call: the call's atom, or a Wait's condition."""
    states = []
    for call in calls:
        if call.name == WAIT:
            cond = call.args[0] if call.args else ""
            states.append(frozenset() if cond.startswith(BEFORE_MARKER) else frozenset({cond}))
        else:
            states.append(frozenset({call.render()}))
    return states


# -- plan extraction -----------------------------------------------------

def linearize(f: Formula) -> list[PrimitiveCall]:
    """Call sequence of a plan formula produced by :func:`translate`.

    Or-items take their left branch; ``G(!...)`` constraints contribute no
    calls. Anything outside that fragment raises NonPlanFormula.
    """
    conjuncts = _top_conjuncts(f)
    plans = [c for c in conjuncts if isinstance(c, Finally)]
    for c in conjuncts:
        if isinstance(c, Finally):
            continue
        if isinstance(c, Globally) and isinstance(c.sub, Not):
            continue
        if isinstance(c, TrueConst) and len(conjuncts) == 1:
            return []
        raise NonPlanFormula(f"not a plan formula: {render(c)}")
    if len(plans) > 1:
        raise NonPlanFormula("more than one plan spine")
    if not plans:
        return []
    return _lin_chain(plans[0].sub)


def _top_conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, And) and not isinstance(f.right, Finally) or \
            isinstance(f, And) and isinstance(f.left, Finally):
        return _top_conjuncts(f.left) + _top_conjuncts(f.right)
    return [f]


def _lin_chain(f: Formula) -> list[PrimitiveCall]:
    calls: list[PrimitiveCall] = []
    while True:
        if isinstance(f, And) and isinstance(f.right, Finally):
            calls.extend(_lin_item(f.left))
            f = f.right.sub
            continue
        calls.extend(_lin_item(f))
        return calls


def _lin_item(f: Formula) -> list[PrimitiveCall]:
    if isinstance(f, Atom):
        if is_condition_atom(f):
            return [PrimitiveCall(WAIT, (f.prop,))]
        return [atom_call(f)]
    if isinstance(f, Until) and isinstance(f.left, Not) and isinstance(f.left.sub, Atom):
        if is_condition_atom(f.right) and not is_condition_atom(f.left.sub):
            return [PrimitiveCall(WAIT, (f.right.prop,))]
        if is_condition_atom(f.left.sub) and isinstance(f.right, Atom) and not is_condition_atom(f.right):
            return [atom_call(f.right), PrimitiveCall(WAIT, (BEFORE_MARKER + f.left.sub.prop,))]
    if isinstance(f, Or):
        return _lin_chain(f.left)
    if isinstance(f, And):
        return _lin_chain(f)
    raise NonPlanFormula(f"not a plan item: {render(f)}")


# -- printing ------------------------------------------------------------

_PREC = {Or: 1, And: 2, Until: 3}
_ASCII = {"F": "F", "G": "G", "U": "U", "&": "&", "|": "|", "!": "!", "true": "true"}
_UNICODE = {"F": "𝐅", "G": "𝐆", "U": "𝐔", "&": "∧", "|": "∨", "!": "¬", "true": "⊤"}


def render(f: Formula, unicode: bool = False) -> str:
    sym = _UNICODE if unicode else _ASCII
    return _render(f, sym)


def _render(f: Formula, sym: dict) -> str:
    if isinstance(f, Atom):
        return f.prop
    if isinstance(f, TrueConst):
        return sym["true"]
    if isinstance(f, Not):
        inner = _render(f.sub, sym)
        if type(f.sub) in _PREC:
            inner = f"({inner})"
        return sym["!"] + inner
    if isinstance(f, Finally):
        return f"{sym['F']}({_render(f.sub, sym)})"
    if isinstance(f, Globally):
        return f"{sym['G']}({_render(f.sub, sym)})"
    if isinstance(f, Until):
        left = _render(f.left, sym)
        right = _render(f.right, sym)
        if type(f.left) in _PREC:
            left = f"({left})"
        if type(f.right) in (And, Or):
            right = f"({right})"
        return f"{left} {sym['U']} {right}"
    if isinstance(f, (And, Or)):
        op = sym["&"] if isinstance(f, And) else sym["|"]
        own = _PREC[type(f)]
        left = _render(f.left, sym)
        right = _render(f.right, sym)
        # parenthesize Until operands too, purely for readability
        if type(f.left) in _PREC and (_PREC[type(f.left)] < own or type(f.left) is Until):
            left = f"({left})"
        if type(f.right) in _PREC and (_PREC[type(f.right)] <= own or type(f.right) is Until):
            right = f"({right})"
        return f"{left} {op} {right}"
    raise TypeError(f"not a formula: {f!r}")


# -- parsing -------------------------------------------------------------

_LEX = re.compile(r"\s*(?:(?P<atom>[A-Za-z_]\w*\([^()]*\))|(?P<ident>[A-Za-z_]\w*)|(?P<op>[()!&|]))")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _LEX.match(text, pos)
            if not m or m.end() == pos:
                off = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
                raise FormulaSyntaxError(f"unexpected character {text[off]!r}", off)
            kind = m.lastgroup
            value = m.group(kind)
            start = m.start(kind)
            if kind == "atom" and value.split("(")[0] in ("F", "G"):
                # F(...) / G(...) with a flat body: split into operator and parens
                name = value.split("(")[0]
                self.tokens.append(("ident", name, start))
                pos = start + len(name)
                continue
            self.tokens.append((kind, value, start))
            pos = m.end()
        self.i = 0

    def peek(self) -> Optional[tuple[str, str, int]]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise FormulaSyntaxError("unexpected end of input", len(self.text))
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value:
            raise FormulaSyntaxError(f"expected {value!r}, found {tok[1]!r}", tok[2])

    def parse(self) -> Formula:
        f = self.disjunction()
        tok = self.peek()
        if tok is not None:
            raise FormulaSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return f

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek() and self.peek()[1] == "|":
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.until()
        while self.peek() and self.peek()[1] == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        f = self.unary()
        tok = self.peek()
        if tok and tok[0] == "ident" and tok[1] == "U":
            self.take()
            return Until(f, self.until())
        return f

    def unary(self) -> Formula:
        tok = self.take()
        kind, value, off = tok
        if value == "!":
            return Not(self.unary())
        if kind == "ident" and value in ("F", "G"):
            nxt = self.peek()
            if nxt is None or nxt[1] != "(":
                raise FormulaSyntaxError(f"expected '(' after {value}", nxt[2] if nxt else len(self.text))
            sub = self.unary()
            return Finally(sub) if value == "F" else Globally(sub)
        if value == "(":
            f = self.disjunction()
            self.expect(")")
            return f
        if kind == "ident" and value == "true":
            return TRUE
        if kind == "ident" and value == "U":
            raise FormulaSyntaxError("'U' needs a left operand", off)
        if kind in ("ident", "atom"):
            return Atom(_normalize_atom(value))
        raise FormulaSyntaxError(f"unexpected {value!r}", off)


def _normalize_atom(text: str) -> str:
    if "(" not in text:
        return text
    name, body = text.split("(", 1)
    body = body[:-1].strip()
    args = [a.strip() for a in body.split(",")] if body else []
    return f"{name}({', '.join(args)})"


def parse(text: str) -> Formula:
    """Parse the ASCII syntax produced by :func:`render` (``!`` > ``U`` > ``&`` > ``|``)."""
    return _Parser(text).parse()
