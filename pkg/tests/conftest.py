import os

import numpy as np
import pytest

from rulecircuit.contexts import EmpiricalContextDistribution, RuleContextMatrix
from rulecircuit.kg import TripleStore
from rulecircuit.rules import Atom, Rule, RuleProgram

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "data")

# Shared 4-rule / 5-context fixture (uniform weights). Columns list the
# active rule ids per context; rule ids 0..3 play the roles r1..r4.
FIXTURE_F_COLUMNS = [(0, 1), (0, 2), (1, 2), (0, 2), (2, 3)]


@pytest.fixture
def fixture_f() -> RuleContextMatrix:
    return RuleContextMatrix(n_rules=4, columns=list(FIXTURE_F_COLUMNS))

@pytest.fixture
def fixture_f_dist() -> EmpiricalContextDistribution:
    return EmpiricalContextDistribution.uniform(len(FIXTURE_F_COLUMNS))


def make_store(triples, role="train") -> TripleStore:
    store = TripleStore(role=role)
    for h, r, t in triples:
        store.add(h, r, t)
    return store


def make_program(rule_specs) -> RuleProgram:
    """rule_specs: list of (head, body, confidence, support) tuples where
    atoms are (relation, subject, object) triples."""
    rules = []
    for i, spec in enumerate(rule_specs):
        head, body = spec[0], spec[1]
        confidence = spec[2] if len(spec) > 2 else 1.0
        support = spec[3] if len(spec) > 3 else 10
        bg = max(1, round(support / confidence)) if confidence > 0 else support + 10
        rules.append(
            Rule(
                id=i,
                head=Atom(*head),
                body=tuple(Atom(*a) for a in body),
                confidence=support / bg,
                support=support,
                body_groundings=bg,
                origin=i,
            )
        )
    return RuleProgram(rules)


def data_path(*parts: str) -> str:
    return os.path.join(DATA_DIR, *parts)


def random_small_store(rng: np.random.Generator, max_entities=8, max_relations=4, max_triples=50):
    n_e = int(rng.integers(2, max_entities + 1))
    n_r = int(rng.integers(1, max_relations + 1))
    n_t = int(rng.integers(1, max_triples + 1))
    store = TripleStore()
    for _ in range(n_t):
        h = f"e{rng.integers(n_e)}"
        r = f"r{rng.integers(n_r)}"
        t = f"e{rng.integers(n_e)}"
        store.add(h, r, t)
    return store


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the acceptance suite's per-criterion verdict lines."""
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
