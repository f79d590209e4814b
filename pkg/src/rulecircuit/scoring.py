"""Candidate scoring for test queries and AnyBURL-style prediction files.

All scorers work off a firing map (candidate entity -> rule ids that
predict it under grounding):

* PC1      -- max singleton marginal among the firing rules,
* PC2      -- exact: 1 - P(every firing rule inactive),
* PC3      -- max recorded all-active marginal over rule sets that share a
              rule with the firings,
* baseline -- max confidence over the firing top-n rules, tie-broken by
              the next-highest distinct firing confidence, then entity id.

The Prop-style diagnostic ``upper_bound`` uses, for each emitted set S
disjoint from the firings, the probability that no rule outside S is
active: candidates for q cannot sit inside such "only S" mass, so
1 - P(only S) bounds the query probability from above. Scores never see
the ground-truth entity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ._io import atomic_write_text
from .circuit import Circuit, query_marginal_batch
from .kg import TripleStore
from .grounding import predict_candidates
from .rules import Rule, RuleProgram
from .rulesets import RulesetCollection

DEFAULT_TOP_K = 1000


@dataclass(frozen=True)
class Query:
    """One link-prediction query; ``truth`` is for evaluation only."""

    direction: str  # "tail": (known, rel, ?)   "head": (?, rel, known)
    known: str
    relation: str
    truth: str

    def __post_init__(self) -> None:
        if self.direction not in ("head", "tail"):
            raise ValueError(f"direction must be 'head' or 'tail', got {self.direction!r}")

    def as_pattern(self) -> tuple[Optional[str], str, Optional[str]]:
        if self.direction == "tail":
            return (self.known, self.relation, None)
        return (None, self.relation, self.known)


@dataclass
class Candidate:
    entity: int
    score: float
    firing: tuple[int, ...]


@dataclass
class RankedPrediction:
    query: Query
    candidates: list[Candidate]


def queries_for_triple(head: str, relation: str, tail: str) -> tuple[Query, Query]:
    return (
        Query(direction="tail", known=head, relation=relation, truth=tail),
        Query(direction="head", known=tail, relation=relation, truth=head),
    )


def collect_firings(
    query: Query,
    rules: Sequence[Rule],
    train_store: TripleStore,
) -> dict[int, set[int]]:
    """Candidate entity -> ids of the given rules that predict it."""
    pattern = query.as_pattern()
    firings: dict[int, set[int]] = {}
    for rule in rules:
        if rule.head.relation != query.relation:
            continue
        for entity in predict_candidates(rule, pattern, train_store):
            firings.setdefault(entity, set()).add(rule.id)
    return firings


def _ranked(
    query: Query,
    scored: Iterable[tuple[int, float, tuple[int, ...], tuple]],
    top_k: int,
) -> RankedPrediction:
    """Sort candidates by (score desc, extra key, entity id asc) and truncate."""
    ordered = sorted(scored, key=lambda c: (-c[1], c[3], c[0]))
    return RankedPrediction(
        query=query,
        candidates=[Candidate(entity=e, score=s, firing=f) for e, s, f, _ in ordered[:top_k]],
    )


def score_pc1(
    query: Query,
    firings: Mapping[int, set[int]],
    marginals: np.ndarray,
    top_k: int = DEFAULT_TOP_K,
) -> RankedPrediction:
    scored = [
        (e, float(max(marginals[r] for r in rules)), tuple(sorted(rules)), ())
        for e, rules in firings.items()
    ]
    return _ranked(query, scored, top_k)


def score_pc2(
    query: Query,
    firings: Mapping[int, set[int]],
    circuit: Circuit,
    top_k: int = DEFAULT_TOP_K,
) -> RankedPrediction:
    entities = sorted(firings)
    if not entities:
        return RankedPrediction(query=query, candidates=[])
    evid = np.full((len(entities), circuit.n_vars), -1, dtype=np.int8)
    for i, e in enumerate(entities):
        evid[i, sorted(firings[e])] = 0
    none_active = query_marginal_batch(circuit, evid)
    scored = [
        (e, float(1.0 - none_active[i]), tuple(sorted(firings[e])), ())
        for i, e in enumerate(entities)
    ]
    return _ranked(query, scored, top_k)


def score_pc3(
    query: Query,
    firings: Mapping[int, set[int]],
    collection: RulesetCollection,
    top_k: int = DEFAULT_TOP_K,
) -> RankedPrediction:
    set_of_rule: dict[int, int] = {}
    for i, s in enumerate(collection.sets):
        for r in s.rule_ids:
            set_of_rule[r] = i
    scored = []
    for e, rules in firings.items():
        touching = {set_of_rule[r] for r in rules if r in set_of_rule}
        if not touching:
            continue
        score = max(collection.sets[i].marginal for i in touching)
        scored.append((e, float(score), tuple(sorted(rules)), ()))
    return _ranked(query, scored, top_k)


def upper_bound(
    firing_rules: Iterable[int],
    collection: RulesetCollection,
    circuit: Circuit,
) -> float:
    """Diagnostic Prop-style upper bound on the query probability.

    For each emitted set S sharing no rule with the firings, mass where no
    rule outside S is active cannot entail the query, so the query
    probability is at most 1 - P(only rules of S active). Returns the
    tightest such bound, or 1.0 when every set intersects the firings.
    """
    fired = set(firing_rules)
    disjoint = [s for s in collection.sets if not (set(s.rule_ids) & fired)]
    if not disjoint:
        return 1.0
    evid = np.full((len(disjoint), circuit.n_vars), 0, dtype=np.int8)
    for i, s in enumerate(disjoint):
        evid[i, list(s.rule_ids)] = -1
    only_mass = query_marginal_batch(circuit, evid)
    return float(min(1.0 - only_mass))


def _baseline_tiebreak(confidences: Iterable[float]) -> tuple:
    distinct = sorted(set(confidences), reverse=True)
    return tuple(-c for c in distinct) + (float("inf"),)


def score_baseline(
    query: Query,
    program_top_n: Sequence[Rule],
    train_store: TripleStore,
    top_k: int = DEFAULT_TOP_K,
) -> RankedPrediction:
    """Max-confidence aggregation over the firing top-n rules.

    ``program_top_n`` must already be the confidence-ordered prefix; ties
    between entities break on the next-highest distinct firing confidence,
    then ascending entity id.
    """
    if not program_top_n:
        raise ValueError("baseline needs at least one rule (top-n >= 1)")
    firings = collect_firings(query, program_top_n, train_store)
    by_id = {r.id: r for r in program_top_n}
    scored = []
    for e, rules in firings.items():
        confs = [by_id[r].confidence for r in rules]
        scored.append((e, max(confs), tuple(sorted(rules)), _baseline_tiebreak(confs)))
    return _ranked(query, scored, top_k)


def baseline_order(program: RuleProgram) -> list[Rule]:
    """Rules by confidence descending; ties by higher support, then id."""
    return sorted(program, key=lambda r: (-r.confidence, -r.support, r.id))


# ----------------------------------------------------------------------
# prediction files (AnyBURL-compatible)
# ----------------------------------------------------------------------


def write_prediction_file(
    path: str,
    entries: Sequence[tuple[tuple[str, str, str], RankedPrediction, RankedPrediction]],
    store: TripleStore,
    fingerprint: Optional[str] = None,
) -> None:
    """Three lines per test triple: the triple, then scored head candidates,
    then scored tail candidates, scores with 6 decimals."""
    lines = []
    if fingerprint:
        lines.append(f"#fingerprint={fingerprint}")
    for (h, r, t), head_pred, tail_pred in entries:
        lines.append(f"{h}\t{r}\t{t}")
        for label, pred in (("Heads", head_pred), ("Tails", tail_pred)):
            parts = [label + ":"]
            for cand in pred.candidates:
                parts.append(store.entities.name(cand.entity))
                parts.append(f"{cand.score:.6f}")
            lines.append("\t".join(parts))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_prediction_file(path: str) -> list[tuple[tuple[str, str, str], list[tuple[str, float]], list[tuple[str, float]]]]:
    """Parse back (triple, head candidates, tail candidates) records."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    if len(lines) % 3:
        raise ValueError(f"{path}: expected groups of 3 lines, got {len(lines)}")
    records = []
    for i in range(0, len(lines), 3):
        h, r, t = lines[i].split("\t")
        cands = []
        for j, label in ((1, "Heads:"), (2, "Tails:")):
            parts = lines[i + j].split("\t")
            if parts[0] != label:
                raise ValueError(f"{path}: expected {label} line, got {parts[0]!r}")
            pairs = parts[1:]
            if len(pairs) % 2:
                raise ValueError(f"{path}: odd candidate/score list on line {i + j + 1}")
            cands.append([(pairs[k], float(pairs[k + 1])) for k in range(0, len(pairs), 2)])
        records.append(((h, r, t), cands[0], cands[1]))
    return records
