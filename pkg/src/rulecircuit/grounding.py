"""Ground rule bodies against a triple store: prediction and abduction.

Grounding joins body atoms over the store indices, most-bound atom first,
and never uses the target triple itself as body evidence (no self-support
leakage). Candidate order is ascending entity id throughout.
"""

from __future__ import annotations

from itertools import product as iter_product
from typing import Iterator, Optional

from .kg import Triple, TripleStore
from .rules import Atom, Rule, RuleProgram, is_variable

Bindings = dict[str, int]


def _resolve(term: str, bindings: Bindings, store: TripleStore) -> Optional[int]:
    """Entity id for a term under bindings; None when still free."""
    if is_variable(term):
        return bindings.get(term)
    return store.entities.get(term)


def _match_atom(
    atom: Atom, bindings: Bindings, store: TripleStore, exclude: Optional[Triple]
) -> Iterator[tuple[Bindings, Triple]]:
    """All store triples matching one atom under current bindings.

    Yields (extended bindings, matched triple). A constant term that is not
    in the store vocabulary matches nothing.
    """
    rel = store.relations.get(atom.relation)
    if rel is None:
        return
    s_const = not is_variable(atom.subject)
    o_const = not is_variable(atom.object)
    s = _resolve(atom.subject, bindings, store)
    o = _resolve(atom.object, bindings, store)
    if (s_const and s is None) or (o_const and o is None):
        return

    if s is not None and o is not None:
        if store.contains(s, rel, o):
            t = Triple(s, rel, o)
            if t != exclude:
                yield bindings, t
        return

    if s is not None:
        for tail in sorted(store.tails_of(s, rel)):
            t = Triple(s, rel, tail)
            if t == exclude:
                continue
            new = dict(bindings)
            new[atom.object] = tail
            yield new, t
        return

    if o is not None:
        for head in sorted(store.heads_of(o, rel)):
            t = Triple(head, rel, o)
            if t == exclude:
                continue
            new = dict(bindings)
            new[atom.subject] = head
            yield new, t
        return

    for t in sorted(store.relation_triples(rel)):
        if t == exclude:
            continue
        if atom.subject == atom.object and t.head != t.tail:
            continue
        new = dict(bindings)
        new[atom.subject] = t.head
        new[atom.object] = t.tail
        yield new, t


def _boundness(atom: Atom, bindings: Bindings) -> int:
    bound = 0
    for term in (atom.subject, atom.object):
        if not is_variable(term) or term in bindings:
            bound += 1
    return bound


def _ground_body(
    atoms: list[Atom],
    bindings: Bindings,
    store: TripleStore,
    exclude: Optional[Triple],
    used: tuple[Triple, ...],
) -> Iterator[tuple[Bindings, tuple[Triple, ...]]]:
    """Full groundings of the remaining atoms; tracks which triples were used."""
    if not atoms:
        yield bindings, used
        return
    # Join the currently most selective atom first; ties keep body order.
    best = max(range(len(atoms)), key=lambda i: (_boundness(atoms[i], bindings), -i))
    atom = atoms[best]
    rest = atoms[:best] + atoms[best + 1 :]
    for new_bindings, triple in _match_atom(atom, bindings, store, exclude):
        yield from _ground_body(rest, new_bindings, store, exclude, used + (triple,))


def predict_candidates(
    rule: Rule,
    query: tuple[Optional[str], str, Optional[str]],
    store: TripleStore,
) -> list[int]:
    """Entities the rule predicts for a (head, relation, ?) or (?, relation, tail) query.

    The rule head must match the query relation. A candidate counts only if
    some body grounding avoids the candidate's own target triple.
    """
    q_head, q_rel, q_tail = query
    if (q_head is None) == (q_tail is None):
        raise ValueError("query must bind exactly one of head/tail")
    if rule.head.relation != q_rel:
        raise ValueError(
            f"rule head relation {rule.head.relation!r} does not match query relation {q_rel!r}"
        )
    rel_id = store.relations.get(q_rel)

    known_term, free_term = (
        (rule.head.subject, rule.head.object) if q_head is not None else (rule.head.object, rule.head.subject)
    )
    known_name = q_head if q_head is not None else q_tail
    known_id = store.entities.get(known_name)
    if known_id is None:
        return []

    bindings: Bindings = {}
    if is_variable(known_term):
        bindings[known_term] = known_id
    elif store.entities.get(known_term) != known_id:
        return []

    # The target triple can only be consumed by a body atom on the query
    # relation; skip the bookkeeping entirely otherwise.
    may_self_support = rel_id is not None and any(a.relation == q_rel for a in rule.body)

    candidates: set[int] = set()
    for result, used in _ground_body(list(rule.body), bindings, store, None, ()):
        if is_variable(free_term):
            cand = result.get(free_term)
            if cand is None:
                continue
        else:
            cand = store.entities.get(free_term)
            if cand is None:
                continue
        if cand in candidates:
            continue
        if may_self_support:
            target = (
                Triple(known_id, rel_id, cand) if q_head is not None else Triple(cand, rel_id, known_id)
            )
            if target in used:
                continue
        candidates.add(cand)
    return sorted(candidates)


def _head_unify(head: Atom, triple: Triple, store: TripleStore) -> Optional[Bindings]:
    """Bindings making the head atom equal the triple, or None."""
    if store.relations.get(head.relation) != triple.relation:
        return None
    bindings: Bindings = {}
    for term, value in ((head.subject, triple.head), (head.object, triple.tail)):
        if is_variable(term):
            if bindings.get(term, value) != value:
                return None
            bindings[term] = value
        elif store.entities.get(term) != value:
            return None
    return bindings


def abduce_rules(triple: Triple, program: RuleProgram, store: TripleStore) -> list[int]:
    """Ids of rules that explain the triple: head unifies and body grounds
    in the store without the triple itself."""
    rel_name = store.relations.name(triple.relation)
    hits: list[int] = []
    for rule in program.rules_for_head(rel_name):
        bindings = _head_unify(rule.head, triple, store)
        if bindings is None:
            continue
        grounded = next(_ground_body(list(rule.body), bindings, store, triple, ()), None)
        if grounded is not None:
            hits.append(rule.id)
    return sorted(hits)


def naive_groundings(
    rule: Rule,
    store: TripleStore,
    head_bindings: Bindings,
    exclude: Optional[Triple] = None,
) -> list[Bindings]:
    """Exhaustive reference grounder: try every substitution of all body
    variables over the whole entity vocabulary.

    Independent of the join path above; only usable on small stores.
    """
    variables = sorted(set().union(*(a.variables() for a in rule.body)) - set(head_bindings))
    results = []
    all_entities = range(len(store.entities))
    for combo in iter_product(all_entities, repeat=len(variables)):
        bindings = dict(head_bindings)
        bindings.update(zip(variables, combo))
        ok = True
        for atom in rule.body:
            s = _resolve(atom.subject, bindings, store)
            o = _resolve(atom.object, bindings, store)
            rel = store.relations.get(atom.relation)
            if s is None or o is None or rel is None or not store.contains(s, rel, o):
                ok = False
                break
            if exclude is not None and Triple(s, rel, o) == exclude:
                ok = False
                break
        if ok:
            results.append(bindings)
    return results
