"""Chow-Liu tree learning over binary rule-activation data.

Pairwise tables get one pseudo-count per cell (+alpha); every univariate
quantity is taken as a margin of those tables, i.e. with 2*alpha pseudo-
counts over C + 4*alpha. Keeping the conventions aligned this way makes
the pairwise tables consistent with each other, so the fitted tree
preserves each variable's smoothed marginal exactly, whatever the
structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contexts import RuleContextMatrix


@dataclass
class ChowLiuTree:
    """Spanning tree with per-edge mutual information and smoothed CPTs.

    ``parents[root] == -1``; ``order`` is topological with the root first.
    ``log_root`` is log P(root = v); ``log_cpt[v, a, b]`` is
    log P(X_v = b | X_parent(v) = a), undefined (NaN) at the root row.
    """

    root: int
    parents: np.ndarray
    order: np.ndarray
    edge_mi: np.ndarray
    log_root: np.ndarray
    log_cpt: np.ndarray

    @property
    def n_vars(self) -> int:
        return len(self.parents)


def pairwise_counts(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(counts-of-ones per var, ones-ones count per var pair) from 0/1 data
    with one row per observation."""
    x = np.asarray(data, dtype=np.float64)
    n1 = x.sum(axis=0)
    n11 = x.T @ x
    return n1, n11


def smoothed_pair_tables(
    n1: np.ndarray, n11: np.ndarray, n_obs: float, alpha: float
) -> np.ndarray:
    """Joint tables p[i, j, a, b] = P(X_i = a, X_j = b), +alpha per cell."""
    v = len(n1)
    n10 = n1[:, None] - n11
    n01 = n1[None, :] - n11
    n00 = n_obs - n11 - n10 - n01
    joint = np.empty((v, v, 2, 2))
    joint[:, :, 0, 0] = n00 + alpha
    joint[:, :, 0, 1] = n01 + alpha
    joint[:, :, 1, 0] = n10 + alpha
    joint[:, :, 1, 1] = n11 + alpha
    joint /= n_obs + 4.0 * alpha
    return joint


def mutual_information_matrix(joint: np.ndarray) -> np.ndarray:
    """Pairwise MI from consistent joint tables; clipped at zero."""
    p1 = joint[:, :, 1, 0] + joint[:, :, 1, 1]  # P(X_i = 1), constant along j
    marg_i = np.stack([1.0 - p1, p1], axis=-1)
    q1 = joint[:, :, 0, 1] + joint[:, :, 1, 1]  # P(X_j = 1)
    marg_j = np.stack([1.0 - q1, q1], axis=-1)
    outer = marg_i[:, :, :, None] * marg_j[:, :, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = joint * (np.log(joint) - np.log(outer))
    terms = np.where(joint > 0, terms, 0.0)
    mi = terms.sum(axis=(2, 3))
    np.fill_diagonal(mi, 0.0)
    return np.maximum(mi, 0.0)


def maximum_spanning_tree(mi: np.ndarray) -> list[tuple[int, int]]:
    """Kruskal over MI, ties broken by (min-id, max-id) edge order."""
    v = mi.shape[0]
    if v <= 1:
        return []
    rows, cols = np.triu_indices(v, k=1)
    rank = np.lexsort((cols, rows, -mi[rows, cols]))
    parent = list(range(v))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    for e in rank:
        i, j = int(rows[e]), int(cols[e])
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            chosen.append((i, j))
            if len(chosen) == v - 1:
                break
    return chosen


def _orient(n_vars: int, edges: list[tuple[int, int]], root: int) -> tuple[np.ndarray, np.ndarray]:
    adj: dict[int, list[int]] = {v: [] for v in range(n_vars)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    parents = np.full(n_vars, -1, dtype=np.int64)
    order = [root]
    seen = {root}
    queue = [root]
    while queue:
        u = queue.pop(0)
        for w in sorted(adj[u]):
            if w not in seen:
                seen.add(w)
                parents[w] = u
                order.append(w)
                queue.append(w)
    return parents, np.asarray(order, dtype=np.int64)


def fit_parameters(
    parents: np.ndarray,
    order: np.ndarray,
    joint: np.ndarray,
    root: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Root marginal and edge CPTs from the smoothed pairwise tables."""
    v = len(parents)
    p_root1 = joint[root, root, 1, 0] + joint[root, root, 1, 1]
    log_root = np.log(np.array([1.0 - p_root1, p_root1]))
    log_cpt = np.full((v, 2, 2), np.nan)
    for child in range(v):
        par = parents[child]
        if par < 0:
            continue
        pair = joint[par, child]  # indexed [parent value, child value]
        log_cpt[child] = np.log(pair) - np.log(pair.sum(axis=1, keepdims=True))
    return log_root, log_cpt


def learn_structure(matrix: RuleContextMatrix, alpha: float) -> ChowLiuTree:
    """Maximum-spanning tree over smoothed pairwise mutual information.

    Deterministic: ties in MI resolve by (min-id, max-id) edge order and
    the root is always variable 0. A single-variable matrix yields the
    degenerate one-node tree.
    """
    if matrix.n_contexts < 1:
        raise ValueError("learn_structure needs at least one context")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    data = matrix.to_dense()
    n1, n11 = pairwise_counts(data)
    joint = smoothed_pair_tables(n1, n11, matrix.n_contexts, alpha)
    mi = mutual_information_matrix(joint)
    edges = maximum_spanning_tree(mi)
    parents, order = _orient(matrix.n_rules, edges, root=0)
    log_root, log_cpt = fit_parameters(parents, order, joint, root=0)
    edge_mi = np.full(matrix.n_rules, np.nan)
    for child in range(matrix.n_rules):
        if parents[child] >= 0:
            edge_mi[child] = mi[parents[child], child]
    return ChowLiuTree(
        root=0,
        parents=parents,
        order=order,
        edge_mi=edge_mi,
        log_root=log_root,
        log_cpt=log_cpt,
    )
