"""Ordered rule-set generation over circuit marginals.

Two generators: singleton sets sorted by marginal probability, and greedy
walks that grow a set while the all-active marginal of the extended set
stays at or above a threshold delta. Walks partition the rules: every walk
seed is emitted even when its own marginal is below delta.

``query_count`` tallies every circuit marginal evaluation the generator
asked for (cached singleton marginals count once per rule). Because the
all-active marginal of a set can never exceed any member's singleton
marginal, extension candidates whose cached singleton marginal is already
below delta are pruned without a query; with delta = 1 this collapses the
whole run to the initial |rules| singleton queries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._io import atomic_write_text
from .circuit import Circuit, query_marginal_batch, singleton_marginals
from .rules import RuleProgram


@dataclass(frozen=True)
class Ruleset:
    rule_ids: tuple[int, ...]
    marginal: float
    walk_index: int


@dataclass
class RulesetCollection:
    sets: list[Ruleset]
    method: str
    delta: Optional[float]
    query_count: int

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def covered_rules(self) -> set[int]:
        out: set[int] = set()
        for s in self.sets:
            out |= set(s.rule_ids)
        return out

    def first_n(self, n: int) -> "RulesetCollection":
        return RulesetCollection(
            sets=self.sets[:n], method=self.method, delta=self.delta, query_count=self.query_count
        )


def _check_scope(circuit: Circuit, program: RuleProgram) -> None:
    if circuit.n_vars != len(program):
        raise ValueError(
            f"circuit scope has {circuit.n_vars} variables but program has {len(program)} rules"
        )


def singleton_rulesets(circuit: Circuit, program: RuleProgram) -> RulesetCollection:
    """One singleton set per rule, ordered by P(rule active) descending,
    ties by ascending rule id."""
    _check_scope(circuit, program)
    marginals = singleton_marginals(circuit)
    order = np.lexsort((np.arange(len(program)), -marginals))
    sets = [
        Ruleset(rule_ids=(int(r),), marginal=float(marginals[r]), walk_index=i)
        for i, r in enumerate(order)
    ]
    return RulesetCollection(sets=sets, method="singleton", delta=None, query_count=len(program))


def _conjunction_marginals(circuit: Circuit, base: tuple[int, ...], candidates: Sequence[int]) -> np.ndarray:
    evid = np.full((len(candidates), circuit.n_vars), -1, dtype=np.int8)
    evid[:, list(base)] = 1
    for i, r in enumerate(candidates):
        evid[i, r] = 1
    return query_marginal_batch(circuit, evid)


def greedy_rulesets(circuit: Circuit, program: RuleProgram, delta: float) -> RulesetCollection:
    """Greedy walks: seed with the best remaining singleton marginal, then
    repeatedly absorb the rule maximizing the extended all-active marginal
    while that marginal stays >= delta. The first extension falling below
    delta is not included; argmax ties resolve by ascending rule id.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must be in [0, 1], got {delta}")
    _check_scope(circuit, program)
    singles = singleton_marginals(circuit)
    queries = len(program)

    remaining = sorted(range(len(program)))
    sets: list[Ruleset] = []
    walk = 0
    while remaining:
        seed = max(remaining, key=lambda r: (singles[r], -r))
        current = (seed,)
        current_marginal = float(singles[seed])
        remaining.remove(seed)
        while remaining:
            # A set marginal never exceeds a member's singleton marginal, so
            # candidates already below delta cannot survive the extension.
            candidates = [r for r in remaining if singles[r] >= delta]
            if not candidates:
                break
            ext = _conjunction_marginals(circuit, current, candidates)
            queries += len(candidates)
            best = int(np.lexsort((candidates, -ext))[0])
            if ext[best] < delta:
                break
            current = tuple(sorted(current + (candidates[best],)))
            current_marginal = float(ext[best])
            remaining.remove(candidates[best])
        sets.append(Ruleset(rule_ids=current, marginal=current_marginal, walk_index=walk))
        walk += 1
    return RulesetCollection(sets=sets, method="greedy", delta=delta, query_count=queries)


def save_rulesets(collection: RulesetCollection, path: str, fingerprint: Optional[str] = None) -> None:
    lines = []
    if fingerprint:
        lines.append(f"#fingerprint={fingerprint}")
    for s in collection.sets:
        lines.append(f"{s.walk_index}\t{s.marginal!r}\t{' '.join(str(r) for r in s.rule_ids)}")
    lines.append(f"queries={collection.query_count}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_rulesets(path: str, method: str = "unknown", delta: Optional[float] = None) -> RulesetCollection:
    sets: list[Ruleset] = []
    query_count = 0
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if line.startswith("queries="):
                query_count = int(line.split("=", 1)[1])
                continue
            walk_txt, marg_txt, ids_txt = line.split("\t", 2)
            ids = tuple(int(x) for x in ids_txt.split()) if ids_txt else ()
            sets.append(Ruleset(rule_ids=ids, marginal=float(marg_txt), walk_index=int(walk_txt)))
    return RulesetCollection(sets=sets, method=method, delta=delta, query_count=query_count)
