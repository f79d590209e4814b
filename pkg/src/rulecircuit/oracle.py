"""Desk-scale ground truth by direct enumeration.

Everything here recomputes probabilities straight from matrix columns (set
algebra over contexts) or from explicit possible-world enumeration; none
of it shares code with the circuit evaluator or the scorers, so agreement
between the two is evidence rather than tautology.

Reading of the marginal events, recorded once for the whole package:

* a context *activates* rule set R when its active set contains R
  (the all-active conjunction of the learned distribution);
* a context *entails* R when one is contained in the other -- containment
  of the context's active set in R is counted as entailment, which is the
  reading under which the lower-bound sum of the activation mass is an
  inequality that can be checked at all;
* a context entails a *query* when it activates at least one rule that
  fires for the query.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .contexts import EmpiricalContextDistribution, RuleContextMatrix


@dataclass
class CheckReport:
    name: str
    passed: bool
    checked: int
    details: str = ""
    counterexample: Optional[str] = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.details})" if self.details else ""
        ce = f" counterexample: {self.counterexample}" if self.counterexample else ""
        return f"{status} {self.name}: {self.checked} checks{extra}{ce}"


# ----------------------------------------------------------------------
# Eq.-1 style context enumeration
# ----------------------------------------------------------------------


def oracle_query_prob(
    matrix: RuleContextMatrix,
    dist: EmpiricalContextDistribution,
    entailing_rules: Iterable[int],
) -> float:
    """Mass of contexts activating at least one of the entailing rules."""
    wanted = set(entailing_rules)
    for r in wanted:
        if not 0 <= r < matrix.n_rules:
            raise ValueError(f"rule id {r} outside 0..{matrix.n_rules - 1}")
    return sum(
        float(dist.weights[c]) for c, col in enumerate(matrix.columns) if wanted & set(col)
    )


def oracle_activation_mass(
    matrix: RuleContextMatrix, dist: EmpiricalContextDistribution, rule_set: Iterable[int]
) -> float:
    """Mass of contexts whose active set contains the whole rule set."""
    wanted = set(rule_set)
    return sum(
        float(dist.weights[c]) for c, col in enumerate(matrix.columns) if wanted <= set(col)
    )


def oracle_containment_mass(
    matrix: RuleContextMatrix, dist: EmpiricalContextDistribution, rule_set: Iterable[int]
) -> float:
    """Mass of contexts whose active set lies inside the rule set."""
    allowed = set(rule_set)
    return sum(
        float(dist.weights[c]) for c, col in enumerate(matrix.columns) if set(col) <= allowed
    )


def verify_prop1(
    matrix: RuleContextMatrix,
    dist: EmpiricalContextDistribution,
    rule_set: Iterable[int],
    tol: float = 1e-12,
) -> CheckReport:
    """Lower-bound sum vs. the entailment mass under the recorded reading.

    Asserted: containment mass <= mass of contexts entailing R (active set
    contained in R or containing it). Also asserted: for nonempty R the
    activation mass never exceeds the query probability supported by R
    (the direction the scorers actually rely on). The naive comparison
    against the activation mass alone is reported as a flag, not asserted:
    it fails whenever a context's active set sits strictly inside R.
    """
    rs = set(rule_set)
    lower = oracle_containment_mass(matrix, dist, rs)
    entails = sum(
        float(dist.weights[c])
        for c, col in enumerate(matrix.columns)
        if set(col) <= rs or rs <= set(col)
    )
    ok = lower <= entails + tol
    flags = []
    if rs:
        activation = oracle_activation_mass(matrix, dist, rs)
        query = oracle_query_prob(matrix, dist, rs)
        ok = ok and activation <= query + tol
        if lower > activation + tol:
            flags.append("containment mass exceeds bare activation mass")
    return CheckReport(
        name="prop1",
        passed=ok,
        checked=1,
        details="; ".join(flags) if flags else "",
        counterexample=None if ok else f"R={sorted(rs)} lower={lower} entails={entails}",
    )


def verify_prop2(
    matrix: RuleContextMatrix,
    dist: EmpiricalContextDistribution,
    entailing_rules: Iterable[int],
    tol: float = 1e-12,
) -> CheckReport:
    """P(q) must equal 1 - mass of contexts activating none of the rules."""
    rs = set(entailing_rules)
    direct = oracle_query_prob(matrix, dist, rs)
    none_mass = sum(
        float(dist.weights[c]) for c, col in enumerate(matrix.columns) if not (rs & set(col))
    )
    ok = abs(direct - (1.0 - none_mass)) <= tol
    return CheckReport(
        name="prop2",
        passed=ok,
        checked=1,
        counterexample=None if ok else f"rules={sorted(rs)} direct={direct} 1-neg={1.0 - none_mass}",
    )


def verify_sandwich(
    matrix: RuleContextMatrix,
    dist: EmpiricalContextDistribution,
    collection_sets: Sequence[tuple[tuple[int, ...], float]],
    entailing_rules: Iterable[int],
    tol: float = 1e-12,
) -> CheckReport:
    """PC3-style lower bound <= exact query probability <= upper bound.

    ``collection_sets`` are (rule ids, recorded marginal) pairs from a
    ruleset generator; marginals are recomputed here by enumeration so a
    wrong recorded value cannot hide a violation.
    """
    fired = set(entailing_rules)
    exact = oracle_query_prob(matrix, dist, fired)
    lower = 0.0
    upper = 1.0
    for ids, recorded in collection_sets:
        s = set(ids)
        activation = oracle_activation_mass(matrix, dist, s)
        if abs(activation - recorded) > 1e-9:
            return CheckReport(
                name="sandwich",
                passed=False,
                checked=1,
                counterexample=f"set {sorted(s)} recorded {recorded} != enumerated {activation}",
            )
        if s & fired:
            lower = max(lower, activation)
        else:
            upper = min(upper, 1.0 - oracle_containment_mass(matrix, dist, s))
    ok = lower <= exact + tol and exact <= upper + tol
    return CheckReport(
        name="sandwich",
        passed=ok,
        checked=1,
        counterexample=None
        if ok
        else f"fired={sorted(fired)} lower={lower} exact={exact} upper={upper}",
    )


# ----------------------------------------------------------------------
# Nilsson-semantics world enumeration
# ----------------------------------------------------------------------


@dataclass
class GroundRule:
    """Ground Horn rule: head atom <- conjunction of base atoms."""

    head: int
    body: tuple[int, ...]


@dataclass
class NilssonInstance:
    """Desk-scale instance of the context construction.

    ``n_atoms`` base atoms, rules over them, and per-context activation
    subsets with probabilities summing to one. Size caps keep world
    enumeration exhaustive.
    """

    n_atoms: int
    rules: list[GroundRule]
    context_rules: list[tuple[int, ...]]
    context_probs: list[float]

    MAX_ATOMS = 10
    MAX_RULES = 5
    MAX_CONTEXTS = 4

    def __post_init__(self) -> None:
        if self.n_atoms > self.MAX_ATOMS:
            raise ValueError(f"at most {self.MAX_ATOMS} base atoms")
        if len(self.rules) > self.MAX_RULES:
            raise ValueError(f"at most {self.MAX_RULES} rules")
        if len(self.context_rules) > self.MAX_CONTEXTS:
            raise ValueError(f"at most {self.MAX_CONTEXTS} contexts")
        if abs(sum(self.context_probs) - 1.0) > 1e-12:
            raise ValueError("context probabilities must sum to 1")

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    @property
    def n_contexts(self) -> int:
        return len(self.context_rules)


def _fixpoint(instance: NilssonInstance, active: Iterable[int]) -> set[int]:
    """Forward-chain the active rules' unguarded forms over base atoms."""
    active = set(active)
    atoms: set[int] = set()
    changed = True
    while changed:
        changed = False
        for r in active:
            rule = instance.rules[r]
            if rule.head not in atoms and all(b in atoms for b in rule.body):
                atoms.add(rule.head)
                changed = True
    return atoms


def _nilsson_minimal_model(instance: NilssonInstance, context: int) -> tuple[int, ...]:
    """Forward chaining through the guard machinery of the full program.

    Atoms: base atoms, then one guard per rule, then one selector per
    context. Starts from the selector fact alone and applies
    ``guard(r) <- selector(c)`` for associated rules and the guarded
    ``head <- body AND guard(r)`` rules to fixpoint. Deliberately does not
    reuse the stripped-rule fixpoint.
    """
    nb, nr = instance.n_atoms, instance.n_rules
    world = [0] * (nb + nr + instance.n_contexts)
    world[nb + nr + context] = 1
    changed = True
    while changed:
        changed = False
        for r in instance.context_rules[context]:
            if not world[nb + r]:
                world[nb + r] = 1
                changed = True
        for r, rule in enumerate(instance.rules):
            if world[nb + r] and all(world[b] for b in rule.body) and not world[rule.head]:
                world[rule.head] = 1
                changed = True
    return tuple(world)


def verify_nilsson(instance: NilssonInstance, tol: float = 1e-12) -> CheckReport:
    """World-enumeration check of the probabilistic-logic construction.

    Atoms of the enumerated program: the base atoms, one activation guard
    per rule, one selector per context. The constructed interpretation
    puts each context's probability on the minimal model of the program
    plus that context's selector fact. Over the full 2^N world space this
    asserts:

    (a) enumeration really is exhaustive (world count),
    (b) every support world is a program model, minimal among the
        enumerated models carrying its selector, and selector facts get
        exactly their context's probability,
    (c) every world carrying mass satisfies exactly one selector,
    (d) for every base atom q: the interpretation's mass on worlds
        satisfying q equals the summed probability of contexts whose
        active rules derive q (the latter computed by an independent
        fixpoint over the stripped, unguarded rules).
    """
    nb, nr, nc = instance.n_atoms, instance.n_rules, instance.n_contexts
    n_total = nb + nr + nc
    guard = lambda r: nb + r
    selector = lambda c: nb + nr + c

    worlds = list(itertools.product((0, 1), repeat=n_total))
    if len(worlds) != 2**n_total:
        return CheckReport("nilsson", False, 1, counterexample="world enumeration not exhaustive")

    def satisfies_program(world: Sequence[int]) -> bool:
        for r, rule in enumerate(instance.rules):
            if world[guard(r)] and all(world[b] for b in rule.body) and not world[rule.head]:
                return False
        for c, rules_in_c in enumerate(instance.context_rules):
            if not world[selector(c)]:
                continue
            # guard wiring mu_r <-> association, and selector exclusion
            for r in range(nr):
                if world[guard(r)] != (1 if r in rules_in_c else 0):
                    return False
            for c2 in range(nc):
                if c2 != c and world[selector(c2)]:
                    return False
        return True

    models = [w for w in worlds if satisfies_program(w)]

    mass: dict[tuple[int, ...], float] = {}
    support_of: list[tuple[int, ...]] = []
    for c in range(nc):
        world = _nilsson_minimal_model(instance, c)
        support_of.append(world)
        mass[world] = mass.get(world, 0.0) + instance.context_probs[c]

    # (b) support worlds are models, and minimal among models per selector
    for c, world in enumerate(support_of):
        if not satisfies_program(world):
            return CheckReport(
                "nilsson", False, 1, counterexample=f"support world for context {c} not a model"
            )
        for m in models:
            if m[selector(c)] and any(w and not mw for w, mw in zip(world, m)):
                return CheckReport(
                    "nilsson",
                    False,
                    1,
                    counterexample=f"support world for context {c} not minimal vs {m}",
                )
    for c in range(nc):
        got = sum(w for world, w in mass.items() if world[selector(c)])
        if abs(got - instance.context_probs[c]) > tol:
            return CheckReport(
                "nilsson",
                False,
                1,
                counterexample=f"selector {c} mass {got} != {instance.context_probs[c]}",
            )

    # (c) exactly one selector per positive-mass world
    for world, w in mass.items():
        if w > 0 and sum(world[selector(c)] for c in range(nc)) != 1:
            return CheckReport(
                "nilsson", False, 1, counterexample=f"world with {w} mass has != 1 selector"
            )

    # (d) query equality, independent fixpoint on the right-hand side
    for q in range(nb):
        lhs = sum(w for world, w in mass.items() if world[q])
        rhs = sum(
            instance.context_probs[c]
            for c in range(nc)
            if q in _fixpoint(instance, instance.context_rules[c])
        )
        if abs(lhs - rhs) > tol:
            return CheckReport(
                "nilsson", False, 1, counterexample=f"atom {q}: interp {lhs} != contexts {rhs}"
            )
    return CheckReport("nilsson", True, 1, details=f"{2**n_total} worlds")


# ----------------------------------------------------------------------
# randomized instance generators (shared by tests and `verify`)
# ----------------------------------------------------------------------


def random_matrix(
    rng: np.random.Generator,
    max_rules: int = 12,
    max_contexts: int = 30,
    min_rules: int = 1,
    min_contexts: int = 1,
) -> RuleContextMatrix:
    n_rules = int(rng.integers(min_rules, max_rules + 1))
    n_contexts = int(rng.integers(min_contexts, max_contexts + 1))
    columns = []
    for _ in range(n_contexts):
        size = int(rng.integers(0, n_rules + 1))
        columns.append(tuple(sorted(rng.choice(n_rules, size=size, replace=False))))
    return RuleContextMatrix(n_rules=n_rules, columns=columns)


def random_distribution(rng: np.random.Generator, n_contexts: int) -> EmpiricalContextDistribution:
    if rng.random() < 0.5:
        return EmpiricalContextDistribution.uniform(n_contexts)
    w = rng.dirichlet(np.ones(n_contexts))
    w = w / w.sum()
    return EmpiricalContextDistribution(w)


def random_rule_subset(rng: np.random.Generator, n_rules: int, allow_empty: bool = True) -> set[int]:
    lo = 0 if allow_empty else 1
    size = int(rng.integers(lo, n_rules + 1))
    return set(int(x) for x in rng.choice(n_rules, size=size, replace=False))


def random_nilsson_instance(rng: np.random.Generator) -> NilssonInstance:
    n_atoms = int(rng.integers(2, 7))
    n_rules = int(rng.integers(1, 5))
    n_contexts = int(rng.integers(1, 4))
    rules = []
    for _ in range(n_rules):
        head = int(rng.integers(0, n_atoms))
        body_size = int(rng.integers(0, 3))
        body = tuple(
            int(b) for b in rng.choice([a for a in range(n_atoms) if a != head],
                                       size=min(body_size, n_atoms - 1), replace=False)
        )
        rules.append(GroundRule(head=head, body=body))
    context_rules = []
    for _ in range(n_contexts):
        size = int(rng.integers(0, n_rules + 1))
        context_rules.append(tuple(sorted(int(x) for x in rng.choice(n_rules, size=size, replace=False))))
    probs = rng.dirichlet(np.ones(n_contexts)).tolist()
    probs[-1] = 1.0 - sum(probs[:-1])
    return NilssonInstance(
        n_atoms=n_atoms, rules=rules, context_rules=context_rules, context_probs=probs
    )
