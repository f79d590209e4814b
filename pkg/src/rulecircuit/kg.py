"""Triple store: load, index, and query knowledge-graph facts.

File format: UTF-8, one ``head<TAB>relation<TAB>tail`` triple per line,
no header, no quoting. Lines starting with ``#`` are comments. Duplicate
triples are dropped (counted and logged), and vocabulary ids are dense
integers assigned in first-occurrence order so repeated loads of the same
file produce identical stores.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .errors import TripleParseError

logger = logging.getLogger(__name__)

INVERSE_PREFIX = "inv_"


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class Vocabulary:
    """Bidirectional string <-> dense-id map, ids in first-occurrence order."""

    def __init__(self) -> None:
        self._names: list[str] = []
        self._ids: dict[str, int] = {}

    def add(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def get(self, name: str) -> Optional[int]:
        return self._ids.get(name)

    def name(self, idx: int) -> str:
        return self._names[idx]

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __iter__(self):
        return iter(self._names)


@dataclass
class TripleStore:
    """Immutable-after-construction set of triples with lookup indices.

    ``triples`` keeps first-occurrence order; every index reaches exactly
    the triples that match it. Construction is single-threaded; reads are
    safe to share.
    """

    role: str = "train"
    entities: Vocabulary = field(default_factory=Vocabulary)
    relations: Vocabulary = field(default_factory=Vocabulary)
    triples: list[Triple] = field(default_factory=list)
    _triple_set: set[Triple] = field(default_factory=set, repr=False)
    _by_relation: dict[int, list[Triple]] = field(default_factory=dict, repr=False)
    _tails: dict[tuple[int, int], list[int]] = field(default_factory=dict, repr=False)
    _heads: dict[tuple[int, int], list[int]] = field(default_factory=dict, repr=False)
    _by_entity: dict[int, list[Triple]] = field(default_factory=dict, repr=False)

    def add(self, head: str, relation: str, tail: str) -> bool:
        """Insert one triple by name; returns False for a duplicate."""
        t = Triple(self.entities.add(head), self.relations.add(relation), self.entities.add(tail))
        return self._add_ids(t)

    def _add_ids(self, t: Triple) -> bool:
        if t in self._triple_set:
            return False
        self._triple_set.add(t)
        self.triples.append(t)
        self._by_relation.setdefault(t.relation, []).append(t)
        self._tails.setdefault((t.head, t.relation), []).append(t.tail)
        self._heads.setdefault((t.tail, t.relation), []).append(t.head)
        self._by_entity.setdefault(t.head, []).append(t)
        if t.tail != t.head:
            self._by_entity.setdefault(t.tail, []).append(t)
        return True

    # -- id-level accessors used by the grounding engine ------------------

    def contains(self, head: int, relation: int, tail: int) -> bool:
        return Triple(head, relation, tail) in self._triple_set

    def tails_of(self, head: int, relation: int) -> list[int]:
        return self._tails.get((head, relation), [])

    def heads_of(self, tail: int, relation: int) -> list[int]:
        return self._heads.get((tail, relation), [])

    def relation_triples(self, relation: int) -> list[Triple]:
        return self._by_relation.get(relation, [])

    def entity_triples(self, entity: int) -> list[Triple]:
        return self._by_entity.get(entity, [])

    def __len__(self) -> int:
        return len(self.triples)

    def triple_names(self, t: Triple) -> tuple[str, str, str]:
        return (self.entities.name(t.head), self.relations.name(t.relation), self.entities.name(t.tail))


def load_triples(path: str, role: str = "train", materialize_inverse: bool = False) -> TripleStore:
    """Load a TSV triple file into an indexed store.

    Duplicates are dropped and logged. With ``materialize_inverse`` every
    triple (h, r, t) additionally yields (t, inv_r, h) in a second pass,
    keeping the forward vocabulary untouched.
    """
    store = TripleStore(role=role)
    n_dupes = 0
    n_lines = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or any(p == "" for p in parts):
                raise TripleParseError(
                    f"expected head<TAB>relation<TAB>tail, got {line!r}", path, line_no
                )
            n_lines += 1
            if not store.add(parts[0], parts[1], parts[2]):
                n_dupes += 1
    if n_lines == 0:
        raise TripleParseError("file contains no triples", path, 0)
    if n_dupes:
        logger.info("%s: dropped %d duplicate triple(s)", path, n_dupes)
    if materialize_inverse:
        for t in list(store.triples):
            h, r, tl = store.triple_names(t)
            store.add(tl, INVERSE_PREFIX + r, h)
    return store


def lookup(
    store: TripleStore,
    head: Optional[str] = None,
    relation: Optional[str] = None,
    tail: Optional[str] = None,
) -> set[Triple]:
    """Return all triples matching the bound positions of a pattern.

    The relation must be bound; unbound-relation scans are rejected so that
    grounding code always goes through a relation index. Unknown names
    yield the empty set.
    """
    if relation is None:
        raise ValueError("lookup requires a bound relation")
    r = store.relations.get(relation)
    if r is None:
        return set()
    h = store.entities.get(head) if head is not None else None
    t = store.entities.get(tail) if tail is not None else None
    if head is not None and h is None:
        return set()
    if tail is not None and t is None:
        return set()
    if h is not None and t is not None:
        return {Triple(h, r, t)} if store.contains(h, r, t) else set()
    if h is not None:
        return {Triple(h, r, x) for x in store.tails_of(h, r)}
    if t is not None:
        return {Triple(x, r, t) for x in store.heads_of(t, r)}
    return set(store.relation_triples(r))
