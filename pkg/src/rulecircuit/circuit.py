"""Smooth, decomposable probabilistic circuit over binary rule variables.

Nodes live in topologically sorted arrays (children precede parents, the
root is last). Three kinds:

* sum      -- children with log-weights that normalize to 1,
* product  -- children over disjoint variable scopes,
* leaf     -- (variable, polarity, log-p): a Bernoulli leaf assigning
              probability p to ``variable == polarity`` and 1-p to the
              opposite value; an unassigned variable evaluates to 1.

Indicator leaves are the p = 1 special case. All arithmetic is in log
space; sums use a stable log-sum-exp, so circuits over thousands of
variables do not underflow.

Text format: optional ``#``-comment lines, a ``K n_vars n_nodes`` header,
then one node per line (``S``/``P``/``L``); the root is the last node.
Floats are written with ``repr`` so a round-trip reproduces query results
bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from ._io import atomic_write_text
from .chowliu import ChowLiuTree
from .contexts import EmpiricalContextDistribution, RuleContextMatrix
from .errors import CircuitStructureError

SUM, PROD, LEAF = 0, 1, 2
_KIND_CHARS = {SUM: "S", PROD: "P", LEAF: "L"}
_CHAR_KINDS = {v: k for k, v in _KIND_CHARS.items()}


class _CircuitBuilder:
    """Appends nodes in topological order and hands out their ids."""

    def __init__(self) -> None:
        self.kinds: list[int] = []
        self.children: list[list[int]] = []
        self.log_weights: list[list[float]] = []
        self.leaf_var: list[int] = []
        self.leaf_polarity: list[int] = []
        self.leaf_logp: list[float] = []

    def _push(self, kind: int, children: list[int], weights: list[float],
              var: int, polarity: int, logp: float) -> int:
        self.kinds.append(kind)
        self.children.append(children)
        self.log_weights.append(weights)
        self.leaf_var.append(var)
        self.leaf_polarity.append(polarity)
        self.leaf_logp.append(logp)
        return len(self.kinds) - 1

    def leaf(self, var: int, polarity: int, logp: float) -> int:
        return self._push(LEAF, [], [], var, polarity, logp)

    def product(self, children: list[int]) -> int:
        return self._push(PROD, children, [], -1, 0, 0.0)

    def sum(self, children: list[int], log_weights: list[float]) -> int:
        return self._push(SUM, children, log_weights, -1, 0, 0.0)

    def build(self, n_vars: int, n_components: int) -> "Circuit":
        return Circuit(
            kinds=np.asarray(self.kinds, dtype=np.int8),
            children=[tuple(c) for c in self.children],
            log_weights=[tuple(w) for w in self.log_weights],
            leaf_var=np.asarray(self.leaf_var, dtype=np.int64),
            leaf_polarity=np.asarray(self.leaf_polarity, dtype=np.int8),
            leaf_logp=np.asarray(self.leaf_logp, dtype=np.float64),
            n_vars=n_vars,
            n_components=n_components,
        )


@dataclass
class Circuit:
    kinds: np.ndarray
    children: list[tuple[int, ...]]
    log_weights: list[tuple[float, ...]]
    leaf_var: np.ndarray
    leaf_polarity: np.ndarray
    leaf_logp: np.ndarray
    n_vars: int
    n_components: int
    fit_log_likelihoods: Optional[list[float]] = None
    _plan: Optional["_EvalPlan"] = field(default=None, repr=False, compare=False)
    _scopes: Optional[list[frozenset[int]]] = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.kinds)

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    # ------------------------------------------------------------------
    # structure
    # ------------------------------------------------------------------

    def scopes(self) -> list[frozenset[int]]:
        if self._scopes is None:
            scopes: list[frozenset[int]] = []
            for i in range(self.n_nodes):
                if self.kinds[i] == LEAF:
                    scopes.append(frozenset([int(self.leaf_var[i])]))
                else:
                    acc: frozenset[int] = frozenset()
                    for ch in self.children[i]:
                        acc |= scopes[ch]
                    scopes.append(acc)
            self._scopes = scopes
        return self._scopes

    def validate(self) -> None:
        """Check smoothness, decomposability, weight normalization, and
        topological node order; raises CircuitStructureError."""
        scopes = self.scopes()
        for i in range(self.n_nodes):
            kind = self.kinds[i]
            for ch in self.children[i]:
                if ch >= i:
                    raise CircuitStructureError(f"node {i} references non-preceding child {ch}")
            if kind == SUM:
                if not self.children[i]:
                    raise CircuitStructureError(f"sum node {i} has no children")
                first = scopes[self.children[i][0]]
                for ch in self.children[i][1:]:
                    if scopes[ch] != first:
                        raise CircuitStructureError(f"sum node {i} is not smooth")
                total = float(np.exp(np.asarray(self.log_weights[i])).sum())
                if abs(total - 1.0) > 1e-12 * max(1.0, len(self.log_weights[i])):
                    raise CircuitStructureError(
                        f"sum node {i} weights sum to {total!r}, expected 1"
                    )
            elif kind == PROD:
                union: set[int] = set()
                size = 0
                for ch in self.children[i]:
                    union |= scopes[ch]
                    size += len(scopes[ch])
                if len(union) != size:
                    raise CircuitStructureError(f"product node {i} is not decomposable")
            else:
                var = int(self.leaf_var[i])
                if not 0 <= var < self.n_vars:
                    raise CircuitStructureError(f"leaf {i} variable {var} out of range")
                if self.leaf_logp[i] > 1e-12:
                    raise CircuitStructureError(f"leaf {i} has log-p > 0")
        if scopes[self.root] != frozenset(range(self.n_vars)):
            raise CircuitStructureError("root scope does not cover all variables")

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------

    def _eval_plan(self) -> "_EvalPlan":
        if self._plan is None:
            self._plan = _EvalPlan(self)
        return self._plan

    def log_value_batch(self, evidence: np.ndarray) -> np.ndarray:
        """Log circuit value for each evidence row.

        ``evidence`` is (batch, n_vars) int8 with entries 1/0 for assigned
        values and -1 for marginalized variables.
        """
        return self._eval_plan().run(evidence)

    def value(self, assignment: Mapping[int, int]) -> float:
        evid = np.full((1, self.n_vars), -1, dtype=np.int8)
        for var, val in assignment.items():
            evid[0, var] = val
        return float(np.exp(self.log_value_batch(evid)[0]))


class _EvalPlan:
    """Level-grouped arrays for vectorized bottom-up evaluation."""

    def __init__(self, circuit: Circuit):
        self.circuit = circuit
        n = circuit.n_nodes
        depth = np.zeros(n, dtype=np.int64)
        for i in range(n):
            if circuit.children[i]:
                depth[i] = 1 + max(depth[ch] for ch in circuit.children[i])
        self.leaf_ids = np.where(circuit.kinds == LEAF)[0]
        with np.errstate(divide="ignore"):
            self.leaf_log1mp = np.log1p(-np.exp(circuit.leaf_logp[self.leaf_ids]))
        self.levels = []
        for d in range(1, int(depth.max()) + 1 if n else 0):
            ids = np.where((depth == d) & (circuit.kinds != LEAF))[0]
            if len(ids) == 0:
                continue
            for kind in (PROD, SUM):
                sel = ids[circuit.kinds[ids] == kind]
                if len(sel) == 0:
                    continue
                flat_children = np.concatenate([np.asarray(circuit.children[i], dtype=np.int64) for i in sel])
                seg = np.concatenate([[0], np.cumsum([len(circuit.children[i]) for i in sel])])
                if kind == SUM:
                    flat_w = np.concatenate([np.asarray(circuit.log_weights[i]) for i in sel])
                else:
                    flat_w = None
                self.levels.append((kind, sel, flat_children, seg[:-1], flat_w))

    def run(self, evidence: np.ndarray) -> np.ndarray:
        circuit = self.circuit
        evid = np.asarray(evidence, dtype=np.int8)
        batch = evid.shape[0]
        values = np.zeros((circuit.n_nodes, batch))
        lv = self.leaf_ids
        ev = evid[:, circuit.leaf_var[lv]].T  # (n_leaves, batch)
        match = ev == circuit.leaf_polarity[lv][:, None]
        unassigned = ev == -1
        values[lv] = np.where(
            unassigned, 0.0, np.where(match, circuit.leaf_logp[lv][:, None], self.leaf_log1mp[:, None])
        )
        for kind, ids, flat_children, starts, flat_w in self.levels:
            child_vals = values[flat_children]  # (total_children, batch)
            if kind == PROD:
                values[ids] = np.add.reduceat(child_vals, starts, axis=0)
            else:
                contrib = child_vals + flat_w[:, None]
                seg_max = np.maximum.reduceat(contrib, starts, axis=0)
                safe_max = np.where(np.isneginf(seg_max), 0.0, seg_max)
                expanded = np.repeat(safe_max, np.diff(np.concatenate([starts, [len(flat_children)]])), axis=0)
                with np.errstate(invalid="ignore"):
                    shifted = np.exp(contrib - expanded)
                shifted = np.where(np.isneginf(contrib), 0.0, shifted)
                sums = np.add.reduceat(shifted, starts, axis=0)
                with np.errstate(divide="ignore"):
                    values[ids] = np.where(
                        np.isneginf(seg_max), -np.inf, np.log(np.maximum(sums, 0.0)) + safe_max
                    )
        return values[circuit.root] if circuit.n_nodes else np.zeros(batch)


# ----------------------------------------------------------------------
# queries
# ----------------------------------------------------------------------

Assignment = Union[Mapping[int, int], Iterable[tuple[int, int]]]


def _as_evidence_row(circuit: Circuit, assignment: Assignment) -> np.ndarray:
    row = np.full(circuit.n_vars, -1, dtype=np.int8)
    items = assignment.items() if isinstance(assignment, Mapping) else assignment
    for var, val in items:
        if not 0 <= var < circuit.n_vars:
            raise ValueError(f"variable {var} outside circuit scope 0..{circuit.n_vars - 1}")
        if val not in (0, 1):
            raise ValueError(f"value for variable {var} must be 0 or 1, got {val}")
        if row[var] != -1 and row[var] != val:
            raise ValueError(f"contradictory assignment for variable {var}")
        row[var] = val
    return row


def query_marginal(circuit: Circuit, assignment: Assignment) -> float:
    """Exact marginal probability of a partial assignment (one upward pass).

    Unassigned variables marginalize out; the empty assignment gives 1.
    Repeating a variable with conflicting values is an error.
    """
    row = _as_evidence_row(circuit, assignment)
    return float(np.exp(circuit.log_value_batch(row[None, :])[0]))


def query_marginal_batch(circuit: Circuit, evidence: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Marginals for many evidence rows (-1 entries marginalized)."""
    out = np.empty(evidence.shape[0])
    for lo in range(0, evidence.shape[0], chunk):
        out[lo : lo + chunk] = np.exp(circuit.log_value_batch(evidence[lo : lo + chunk]))
    return out


def singleton_marginals(circuit: Circuit) -> np.ndarray:
    """P(var = 1) for every variable, batched."""
    evid = np.full((circuit.n_vars, circuit.n_vars), -1, dtype=np.int8)
    np.fill_diagonal(evid, 1)
    return query_marginal_batch(circuit, evid)


def log_likelihood(circuit: Circuit, matrix: RuleContextMatrix) -> float:
    """Sum over contexts of the log circuit value at the column's full
    assignment; 0.0 for an empty matrix, -inf only with unsmoothed fits."""
    if matrix.n_contexts == 0:
        return 0.0
    evid = matrix.to_dense().astype(np.int8)
    total = 0.0
    for lo in range(0, evid.shape[0], 512):
        total += float(circuit.log_value_batch(evid[lo : lo + 512]).sum())
    return total


# ----------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------


def compile_trees(trees: Sequence[ChowLiuTree], mixture_log_weights: Sequence[float]) -> Circuit:
    """Compile a mixture of Chow-Liu trees into one circuit.

    Per tree, each variable X with parent value u becomes a sum over
    x in {0, 1} of p(x | u) times an indicator leaf [X = x] times the
    subcircuits of X's tree children conditioned on x; tree-leaf variables
    collapse to a single Bernoulli leaf. Component roots join under the
    mixture sum. The circuit value at a full assignment is exactly the
    mixture of tree factorizations.
    """
    if not trees:
        raise ValueError("need at least one tree")
    n_vars = trees[0].n_vars
    for t in trees:
        if t.n_vars != n_vars or t.root != trees[0].root or not np.array_equal(t.parents, trees[0].parents):
            raise ValueError("mixture components must share one variable set and structure")
    if len(mixture_log_weights) != len(trees):
        raise ValueError("one mixture weight per tree required")

    builder = _CircuitBuilder()
    component_roots: list[int] = []
    for tree in trees:
        tree_children: dict[int, list[int]] = {v: [] for v in range(n_vars)}
        for child in range(n_vars):
            if tree.parents[child] >= 0:
                tree_children[int(tree.parents[child])].append(child)

        # node_for[(var, parent_value)] -> circuit node of the subtree at var
        node_for: dict[tuple[int, int], int] = {}
        for var in [int(v) for v in tree.order[::-1]]:
            kids = tree_children[var]
            is_root = tree.parents[var] < 0
            cond_logps = (
                [tree.log_root, tree.log_root] if is_root else [tree.log_cpt[var, 0], tree.log_cpt[var, 1]]
            )
            for pv in (0, 1) if not is_root else (0,):
                logp = cond_logps[pv]
                if not kids:
                    node_for[(var, pv)] = builder.leaf(var, 1, float(logp[1]))
                    continue
                branches = []
                for x in (0, 1):
                    parts = [builder.leaf(var, x, 0.0)]
                    parts += [node_for[(k, x)] for k in kids]
                    branches.append(builder.product(parts))
                node_for[(var, pv)] = builder.sum(branches, [float(logp[0]), float(logp[1])])
            if is_root:
                node_for[(var, 1)] = node_for[(var, 0)]
        component_roots.append(node_for[(int(tree.root), 0)])

    if len(trees) == 1:
        if component_roots[0] != len(builder.kinds) - 1:
            raise CircuitStructureError("component root must be the last node")
        return builder.build(n_vars, 1)
    builder.sum(component_roots, [float(w) for w in mixture_log_weights])
    return builder.build(n_vars, len(trees))


def empirical_circuit(
    matrix: RuleContextMatrix, dist: Optional[EmpiricalContextDistribution] = None
) -> Circuit:
    """Exact circuit for the empirical context distribution.

    One product component per distinct column (indicator leaves for every
    variable), mixed by the columns' total weight. Marginal queries on this
    circuit equal direct context enumeration exactly, which makes it the
    reference every approximate fit is compared against.
    """
    if dist is None:
        dist = EmpiricalContextDistribution.uniform(matrix.n_contexts)
    weight_of: dict[tuple[int, ...], float] = {}
    for c, col in enumerate(matrix.columns):
        weight_of[col] = weight_of.get(col, 0.0) + float(dist.weights[c])

    builder = _CircuitBuilder()
    roots = []
    weights = []
    for col, w in weight_of.items():
        active = set(col)
        leaves = [
            builder.leaf(v, 1 if v in active else 0, 0.0) for v in range(matrix.n_rules)
        ]
        roots.append(builder.product(leaves))
        weights.append(w)
    with np.errstate(divide="ignore"):
        log_w = list(np.log(np.asarray(weights)))
    if len(roots) == 1:
        # Degenerate single-column matrix: keep the lone product as root.
        circuit = builder.build(matrix.n_rules, 1)
    else:
        builder.sum(roots, [float(w) for w in log_w])
        circuit = builder.build(matrix.n_rules, len(roots))
    return circuit


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------


def save_circuit(circuit: Circuit, path: str, fingerprint: Optional[str] = None) -> None:
    lines = []
    if fingerprint:
        lines.append(f"#fingerprint={fingerprint}")
    lines.append(f"{circuit.n_components} {circuit.n_vars} {circuit.n_nodes}")
    for i in range(circuit.n_nodes):
        kind = int(circuit.kinds[i])
        if kind == SUM:
            body = " ".join(
                f"{ch}:{w!r}" for ch, w in zip(circuit.children[i], circuit.log_weights[i])
            )
            lines.append(f"{i} S {body}")
        elif kind == PROD:
            lines.append(f"{i} P {' '.join(str(ch) for ch in circuit.children[i])}")
        else:
            lines.append(
                f"{i} L {int(circuit.leaf_var[i])} {int(circuit.leaf_polarity[i])} "
                f"{float(circuit.leaf_logp[i])!r}"
            )
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_circuit(path: str) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    pos = 0
    while lines[pos].startswith("#"):
        pos += 1
    k_txt, nv_txt, nn_txt = lines[pos].split()
    n_components, n_vars, n_nodes = int(k_txt), int(nv_txt), int(nn_txt)
    builder = _CircuitBuilder()
    for i in range(n_nodes):
        parts = lines[pos + 1 + i].split()
        if int(parts[0]) != i:
            raise ValueError(f"{path}: node id {parts[0]} out of order (expected {i})")
        kind = _CHAR_KINDS[parts[1]]
        if kind == SUM:
            children, weights = [], []
            for tok in parts[2:]:
                ch_txt, _, w_txt = tok.partition(":")
                children.append(int(ch_txt))
                weights.append(float(w_txt))
            builder.sum(children, weights)
        elif kind == PROD:
            builder.product([int(t) for t in parts[2:]])
        else:
            builder.leaf(int(parts[2]), int(parts[3]), float(parts[4]))
    circuit = builder.build(n_vars, n_components)
    if circuit.n_nodes != n_nodes:
        raise ValueError(f"{path}: expected {n_nodes} nodes, parsed {circuit.n_nodes}")
    return circuit
