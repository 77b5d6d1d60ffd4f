"""Persistent cache from high-level action keys to primitive-call policies."""

from __future__ import annotations

import enum
import json
import os
import tempfile
import threading
from pathlib import Path
from typing import Callable, Optional

from .core import ActionDescription, Origin, PrimitiveCall, PrimitiveSet, ReductionPolicy
from .lexicon import head_noun, lemma_verb

SCHEMA_VERSION = 1


class LibraryError(ValueError):
    pass


class InsertStatus(enum.Enum):
    STORED = "stored"
    DUPLICATE_IGNORED = "duplicate-ignored"


def cache_key(action: ActionDescription, granularity: str = "verb+noun") -> str:
    """``verb/noun`` from the lemmatized verb and the head noun of What.

    >>> cache_key(ActionDescription("Boil", what="the eggs"))
    'boil/egg'
    """
    if not action.verb.strip():
        raise ValueError("action has no verb")
    verb = lemma_verb(action.verb)
    if granularity == "verb":
        return verb
    if granularity != "verb+noun":
        raise ValueError(f"unknown key granularity {granularity!r}")
    noun = head_noun(action.what) if action.what else ""
    return f"{verb}/{noun}" if noun else verb


def key_verb(key: str) -> str:
    return key.split("/", 1)[0]


class _Flight:
    __slots__ = ("done", "result", "error")

    def __init__(self):
        self.done = threading.Event()
        self.result: Optional[ReductionPolicy] = None
        self.error: Optional[BaseException] = None


class ActionLibrary:
    """Thread-safe ordered map with first-write-wins inserts.

    ``get_or_compute`` runs at most one computation per missing key at a
    time; concurrent callers for that key wait and share its result.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self._entries: dict[str, ReductionPolicy] = {}
        self._flights: dict[str, _Flight] = {}
        self.dirty = False
        self.schema_version = SCHEMA_VERSION

    @classmethod
    def seeded(cls, primitives: PrimitiveSet) -> "ActionLibrary":
        lib = cls()
        for schema in primitives:
            call = PrimitiveCall(schema.name, tuple(schema.param_roles))
            lib._entries[schema.name.lower()] = ReductionPolicy(schema.name.lower(), (call,), Origin.IDENTITY)
        return lib

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def __contains__(self, key: object) -> bool:
        with self._lock:
            return key in self._entries

    def keys(self) -> list[str]:
        with self._lock:
            return list(self._entries)

    def entries(self) -> list[ReductionPolicy]:
        with self._lock:
            return list(self._entries.values())

    def lookup(self, key: str) -> Optional[ReductionPolicy]:
        with self._lock:
            policy = self._entries.get(key)
        if policy is None or policy.origin is Origin.IDENTITY:
            return policy
        return policy.with_origin(Origin.LIBRARY)

    def insert(self, key: str, policy: ReductionPolicy) -> InsertStatus:
        with self._lock:
            if key in self._entries:
                return InsertStatus.DUPLICATE_IGNORED
            self._entries[key] = policy
            self.dirty = True
            return InsertStatus.STORED

    def invalidate(self, key: str) -> bool:
        with self._lock:
            if key not in self._entries:
                return False
            del self._entries[key]
            self.dirty = True
            return True

    def cached_verbs(self) -> list[str]:
        """Verbs of non-identity entries in insertion order, de-duplicated."""
        with self._lock:
            keys = [k for k, p in self._entries.items() if p.origin is not Origin.IDENTITY]
        return list(dict.fromkeys(key_verb(k) for k in keys))

    def import_list(self, primitives: PrimitiveSet) -> list[str]:
        names = primitives.names()
        return list(dict.fromkeys(names + [v for v in self.cached_verbs() if v not in primitives]))

    def get_or_compute(self, key: str, compute: Callable[[], ReductionPolicy]) -> tuple[ReductionPolicy, bool]:
        """Cached policy for ``key``, computing and inserting it on a miss.

        Returns ``(policy, computed_here)``. Errors from ``compute`` reach
        every caller waiting on that flight and nothing is stored.
        """
        with self._lock:
            hit = self.lookup(key)
            if hit is not None:
                return hit, False
            flight = self._flights.get(key)
            leader = flight is None
            if leader:
                flight = self._flights[key] = _Flight()
        if not leader:
            flight.done.wait()
            if flight.error is not None:
                raise flight.error
            return flight.result, False
        try:
            policy = compute()
            self.insert(key, policy)
            flight.result = self.lookup(key) if policy.origin is Origin.IDENTITY else policy
        except BaseException as exc:
            flight.error = exc
            raise
        finally:
            with self._lock:
                del self._flights[key]
            flight.done.set()
        return flight.result, True

    # -- persistence -----------------------------------------------------

    def to_json(self) -> dict:
        with self._lock:
            return {"schema_version": self.schema_version, "entries": [p.to_dict() for p in self._entries.values()]}

    @classmethod
    def from_json(cls, data: object) -> "ActionLibrary":
        if not isinstance(data, dict) or "entries" not in data:
            raise LibraryError("library file must be an object with 'entries'")
        if data.get("schema_version") != SCHEMA_VERSION:
            raise LibraryError(f"unsupported library schema_version {data.get('schema_version')!r}")
        lib = cls()
        for raw in data["entries"]:
            try:
                policy = ReductionPolicy.from_dict(raw)
            except (KeyError, TypeError, ValueError) as exc:
                raise LibraryError(f"malformed library entry {raw!r}: {exc}") from exc
            if policy.key in lib._entries:
                raise LibraryError(f"duplicate key {policy.key!r} in library file")
            lib._entries[policy.key] = policy
        return lib

    def persist(self, path: str | Path):
        """Atomically write a consistent snapshot as JSON."""
        path = Path(path)
        snapshot = self.to_json()
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(snapshot, fh, indent=1)
                fh.write("\n")
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        with self._lock:
            self.dirty = False

    @classmethod
    def load(cls, path: str | Path) -> "ActionLibrary":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LibraryError(f"{path}: malformed JSON ({exc})") from exc
        return cls.from_json(data)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActionLibrary):
            return NotImplemented
        return list(self.to_json()["entries"]) == list(other.to_json()["entries"])
