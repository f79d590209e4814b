"""Rule-context association matrix and its empirical marginals.

One context per training triple: column c holds the ids of the rules that
abductively explain triple c. Columns with no active rule are kept; they
carry the probability mass of "no rule applies". Two marginal readings of
a rule set R are provided:

* ``exact_marginal``       -- mass of contexts activating every rule in R
                              (the all-active conjunction),
* ``lower_bound_marginal`` -- mass of contexts whose whole active set lies
                              inside R (no rule outside R is active).

The file format is line-oriented: ``n_rules<TAB>n_contexts``, one
``index<TAB>sorted ids`` line per context, then a ``#provenance`` section
mapping each context to its training triple (by name).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from ._io import atomic_write_text
from .grounding import abduce_rules
from .kg import TripleStore
from .rules import RuleProgram


@dataclass
class RuleContextMatrix:
    n_rules: int
    columns: list[tuple[int, ...]]
    provenance: list[tuple[str, str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for c, col in enumerate(self.columns):
            if list(col) != sorted(set(col)):
                raise ValueError(f"column {c} is not a sorted duplicate-free id list: {col}")
            if col and (col[0] < 0 or col[-1] >= self.n_rules):
                raise ValueError(f"column {c} has rule ids outside 0..{self.n_rules - 1}")
        if self.provenance and len(self.provenance) != len(self.columns):
            raise ValueError("provenance length does not match number of contexts")

    @property
    def n_contexts(self) -> int:
        return len(self.columns)

    def to_dense(self) -> np.ndarray:
        """Contexts-by-rules 0/1 matrix (one row per context)."""
        dense = np.zeros((self.n_contexts, self.n_rules), dtype=np.uint8)
        for c, col in enumerate(self.columns):
            dense[c, list(col)] = 1
        return dense


@dataclass
class EmpiricalContextDistribution:
    """Per-context weights; uniform 1/|C| unless given explicitly."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if np.any(self.weights < 0):
            raise ValueError("context weights must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"context weights sum to {self.weights.sum()}, expected 1")

    @classmethod
    def uniform(cls, n_contexts: int) -> "EmpiricalContextDistribution":
        if n_contexts <= 0:
            raise ValueError("need at least one context")
        return cls(np.full(n_contexts, 1.0 / n_contexts))


def build_matrix(program: RuleProgram, train_store: TripleStore) -> RuleContextMatrix:
    """Abduce every training triple against the program, one column each.

    Column order follows the store's triple order, so rebuilding from the
    same inputs is bit-reproducible. The per-triple abductions are
    independent (safe to parallelize); run serially here.
    """
    if len(program) == 0 or len(train_store) == 0:
        raise ValueError("build_matrix requires a nonempty program and store")
    columns = [tuple(abduce_rules(t, program, train_store)) for t in train_store.triples]
    provenance = [train_store.triple_names(t) for t in train_store.triples]
    return RuleContextMatrix(n_rules=len(program), columns=columns, provenance=provenance)


def _check_ids(matrix: RuleContextMatrix, ids: Iterable[int]) -> frozenset[int]:
    s = frozenset(ids)
    for r in s:
        if not 0 <= r < matrix.n_rules:
            raise ValueError(f"rule id {r} outside 0..{matrix.n_rules - 1}")
    return s


def exact_marginal(
    matrix: RuleContextMatrix,
    dist: EmpiricalContextDistribution,
    active_set: Iterable[int],
) -> float:
    """Mass of contexts that activate every rule in ``active_set``."""
    wanted = _check_ids(matrix, active_set)
    total = 0.0
    for c, col in enumerate(matrix.columns):
        if wanted <= set(col):
            total += float(dist.weights[c])
    return total


def lower_bound_marginal(
    matrix: RuleContextMatrix,
    dist: EmpiricalContextDistribution,
    rule_set: Iterable[int],
) -> float:
    """Mass of contexts whose active set is contained in ``rule_set``."""
    allowed = _check_ids(matrix, rule_set)
    total = 0.0
    for c, col in enumerate(matrix.columns):
        if set(col) <= allowed:
            total += float(dist.weights[c])
    return total


def save_matrix(matrix: RuleContextMatrix, path: str, fingerprint: Optional[str] = None) -> None:
    lines = []
    if fingerprint:
        lines.append(f"#fingerprint={fingerprint}")
    lines.append(f"{matrix.n_rules}\t{matrix.n_contexts}")
    for c, col in enumerate(matrix.columns):
        lines.append(f"{c}\t{' '.join(str(r) for r in col)}")
    if matrix.provenance:
        lines.append("#provenance")
        for c, (h, r, t) in enumerate(matrix.provenance):
            lines.append(f"{c}\t{h}\t{r}\t{t}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_matrix(path: str) -> RuleContextMatrix:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    pos = 0
    while pos < len(lines) and lines[pos].startswith("#"):
        pos += 1
    n_rules_txt, n_contexts_txt = lines[pos].split("\t")
    n_rules, n_contexts = int(n_rules_txt), int(n_contexts_txt)
    pos += 1
    columns: list[tuple[int, ...]] = []
    for c in range(n_contexts):
        idx_txt, _, ids_txt = lines[pos + c].partition("\t")
        if int(idx_txt) != c:
            raise ValueError(f"{path}: context index {idx_txt} out of order (expected {c})")
        columns.append(tuple(int(x) for x in ids_txt.split()) if ids_txt else ())
    pos += n_contexts
    provenance: list[tuple[str, str, str]] = []
    if pos < len(lines) and lines[pos] == "#provenance":
        pos += 1
        for c in range(n_contexts):
            idx_txt, h, r, t = lines[pos + c].split("\t")
            if int(idx_txt) != c:
                raise ValueError(f"{path}: provenance index {idx_txt} out of order")
            provenance.append((h, r, t))
    return RuleContextMatrix(n_rules=n_rules, columns=columns, provenance=provenance)
