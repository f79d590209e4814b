import numpy as np
import pytest

from rulecircuit.grounding import abduce_rules, naive_groundings, predict_candidates
from rulecircuit.kg import Triple
from rulecircuit.rules import Atom, Rule, RuleProgram, is_variable

from conftest import make_program, make_store, random_small_store


def entity_names(store, ids):
    return {store.entities.name(i) for i in ids}


def test_predict_single_atom_copy_rule():
    store = make_store([("a", "s", "b")])
    program = make_program([(("r", "X", "Y"), [("s", "X", "Y")])])
    cands = predict_candidates(program[0], ("a", "r", None), store)
    assert entity_names(store, cands) == {"b"}


def test_predict_chain_rule_enumerates_all_tails():
    store = make_store([("a", "s", "m"), ("m", "t", "c"), ("m", "t", "d")])
    program = make_program([(("r", "X", "Y"), [("s", "X", "A"), ("t", "A", "Y")])])
    cands = predict_candidates(program[0], ("a", "r", None), store)
    assert entity_names(store, cands) == {"c", "d"}


def test_predict_rejects_relation_mismatch():
    store = make_store([("a", "s", "b")])
    program = make_program([(("r", "X", "Y"), [("s", "X", "Y")])])
    with pytest.raises(ValueError, match="does not match query relation"):
        predict_candidates(program[0], ("a", "s", None), store)


def test_predict_head_direction_and_constants():
    store = make_store([("a", "s", "b"), ("c", "s", "b")])
    program = make_program([(("r", "X", "Y"), [("s", "X", "Y")])])
    cands = predict_candidates(program[0], (None, "r", "b"), store)
    assert entity_names(store, cands) == {"a", "c"}
    const_prog = make_program([(("r", "X", "b"), [("s", "X", "A")])])
    cands = predict_candidates(const_prog[0], ("a", "r", None), store)
    assert entity_names(store, cands) == {"b"}


def test_predict_excludes_target_triple_self_support():
    # the only body grounding for candidate b would be the target (a,r,b)
    store = make_store([("a", "r", "b")])
    program = make_program([(("r", "X", "Y"), [("r", "X", "Y")])])
    assert predict_candidates(program[0], ("a", "r", None), store) == []
    # with a grounding that avoids the target, the candidate comes back
    store2 = make_store([("a", "r", "b"), ("a", "r", "c"), ("c", "r", "b")])
    program2 = make_program([(("r", "X", "Y"), [("r", "X", "A"), ("r", "A", "Y")])])
    cands = predict_candidates(program2[0], ("a", "r", None), store2)
    assert entity_names(store2, cands) == {"b"}


def test_abduce_simple_explanation():
    store = make_store([("a", "r", "b"), ("a", "s", "b")])
    program = make_program([(("r", "X", "Y"), [("s", "X", "Y")])])
    triple = next(t for t in store.triples if store.triple_names(t)[1] == "r")
    assert abduce_rules(triple, program, store) == [0]


def test_abduce_excludes_self_support():
    store = make_store([("a", "r", "b")])
    program = make_program([(("r", "X", "Y"), [("r", "X", "Y")])])
    assert abduce_rules(store.triples[0], program, store) == []


def test_abduce_no_head_match():
    store = make_store([("a", "q", "b"), ("a", "s", "b")])
    program = make_program([(("r", "X", "Y"), [("s", "X", "Y")])])
    triple = next(t for t in store.triples if store.triple_names(t)[1] == "q")
    assert abduce_rules(triple, program, store) == []


def test_abduce_respects_head_constants():
    store = make_store([("a", "r", "b"), ("a", "s", "x"), ("c", "r", "b"), ("c", "s", "x")])
    program = make_program([(("r", "a", "Y"), [("s", "a", "A"), ("r", "A", "Y")])])
    # head constant 'a' only unifies with the (a, r, b) triple
    t_a = next(t for t in store.triples if store.triple_names(t) == ("a", "r", "b"))
    t_c = next(t for t in store.triples if store.triple_names(t) == ("c", "r", "b"))
    assert abduce_rules(t_c, program, store) == []
    # body: s(a, A), r(A, b) with A=x fails (no (x, r, b)); nothing abduced
    assert abduce_rules(t_a, program, store) == []


def random_rule(rng, store, rule_id=0):
    relations = list(store.relations)
    variables = ["X", "Y", "A", "B"]
    body_len = int(rng.integers(1, 4))
    head = Atom(str(rng.choice(relations)), "X", "Y")
    body = []
    reachable = {"X", "Y"}
    for i in range(body_len):
        anchor = str(rng.choice(sorted(reachable)))
        other = str(rng.choice(variables + [store.entities.name(int(rng.integers(len(store.entities))))]))
        pair = (anchor, other) if rng.random() < 0.5 else (other, anchor)
        body.append(Atom(str(rng.choice(relations)), *pair))
        reachable |= {t for t in pair if is_variable(t)}
    if not {"X", "Y"} <= set().union(*(a.variables() for a in body)):
        return None
    return Rule(id=rule_id, head=head, body=tuple(body), confidence=1.0,
                support=1, body_groundings=1, origin=rule_id)


def test_join_grounding_matches_exhaustive_enumeration():
    """The indexed join agrees with trying every variable substitution."""
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 120:
        store = random_small_store(rng)
        rule = random_rule(rng, store)
        if rule is None:
            continue
        checked += 1
        for triple in store.triples[:5]:
            if store.relations.name(triple.relation) != rule.head.relation:
                continue
            bindings = {"X": triple.head, "Y": triple.tail}
            naive = naive_groundings(rule, store, bindings, exclude=triple)
            abduced = rule.id in abduce_rules(triple, RuleProgram([rule]), store)
            assert abduced == (len(naive) > 0)
        # prediction side: candidates == tails with a non-target grounding
        head_name = store.entities.name(store.triples[0].head)
        cands = predict_candidates(rule, (head_name, rule.head.relation, None), store)
        rel_id = store.relations.get(rule.head.relation)
        expected = set()
        for y in range(len(store.entities)):
            target = Triple(store.triples[0].head, rel_id, y)
            exclude = target if store.contains(*target) else None
            if naive_groundings(rule, store, {"X": store.triples[0].head, "Y": y}, exclude=exclude):
                expected.add(y)
        assert set(cands) == expected


def test_abduction_soundness_round_trip():
    """Every abduced (rule, triple) pair is confirmed by prediction in both
    query directions."""
    rng = np.random.default_rng(21)
    checked = 0
    while checked < 60:
        store = random_small_store(rng, max_triples=30)
        rules = [r for r in (random_rule(rng, store, i) for i in range(4)) if r is not None]
        if not rules:
            continue
        program = RuleProgram([Rule(id=i, head=r.head, body=r.body, confidence=r.confidence,
                                    support=r.support, body_groundings=r.body_groundings, origin=i)
                               for i, r in enumerate(rules)])
        checked += 1
        for triple in store.triples:
            h, rel, t = store.triple_names(triple)
            for rid in abduce_rules(triple, program, store):
                tails = predict_candidates(program[rid], (h, rel, None), store)
                heads = predict_candidates(program[rid], (None, rel, t), store)
                assert triple.tail in tails
                assert triple.head in heads
