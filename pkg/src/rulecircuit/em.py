"""EM parameter learning for a mixture of Chow-Liu trees.

The tree skeleton is learned once from the full data and frozen; EM only
re-estimates per-component CPTs and mixture weights. Every count in the
M-step carries the same +alpha pseudo-count convention as structure
learning (pairwise cells +alpha, univariate quantities as their margins),
so a K=1 fit with zero iterations is exactly the closed-form Chow-Liu
solution. Initialization draws soft responsibilities from a seeded RNG;
the seed is a required, recorded parameter.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from .chowliu import ChowLiuTree, learn_structure
from .circuit import Circuit, compile_trees
from .contexts import RuleContextMatrix

logger = logging.getLogger(__name__)


def _m_step(
    data: np.ndarray,
    resp: np.ndarray,
    skeleton: ChowLiuTree,
    alpha: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Responsibility-weighted, smoothed parameter estimates.

    Returns (log mixture weights (K,), log root marginals (K, 2),
    log CPTs (K, V, 2, 2) indexed [component, child, parent value, child value]).
    """
    n_obs, n_vars = data.shape
    k = resp.shape[1]
    totals = resp.sum(axis=0)  # (K,)

    log_mix = np.log(totals + alpha) - np.log(n_obs + k * alpha)

    root = skeleton.root
    root_ones = resp.T @ data[:, root]  # (K,)
    p_root1 = (root_ones + 2.0 * alpha) / (totals + 4.0 * alpha)
    log_root = np.log(np.stack([1.0 - p_root1, p_root1], axis=1))

    log_cpt = np.full((k, n_vars, 2, 2), np.nan)
    children = np.where(skeleton.parents >= 0)[0]
    if len(children):
        par = skeleton.parents[children]
        x_c = data[:, children].astype(np.float64)  # (C, E)
        x_p = data[:, par].astype(np.float64)
        n11 = resp.T @ (x_c * x_p)  # (K, E)
        nc1 = resp.T @ x_c
        np1 = resp.T @ x_p
        n10 = np1 - n11  # parent 1, child 0
        n01 = nc1 - n11  # parent 0, child 1
        n00 = totals[:, None] - n11 - n10 - n01
        cells = np.stack(
            [np.stack([n00, n01], axis=-1), np.stack([n10, n11], axis=-1)], axis=-2
        )  # (K, E, parent value, child value)
        cells = cells + alpha
        cpt = cells / cells.sum(axis=-1, keepdims=True)
        log_cpt[:, children] = np.log(cpt)
    return log_mix, log_root, log_cpt


def _component_loglik(
    data: np.ndarray,
    skeleton: ChowLiuTree,
    log_root: np.ndarray,
    log_cpt: np.ndarray,
) -> np.ndarray:
    """(C, K) log-likelihood of each context under each component."""
    k = log_root.shape[0]
    root = skeleton.root
    ll = log_root[:, data[:, root].astype(np.int64)].T  # (C, K)
    children = np.where(skeleton.parents >= 0)[0]
    if len(children):
        par = skeleton.parents[children]
        n_edges = len(children)
        idx = data[:, par].astype(np.int64) * 2 + data[:, children].astype(np.int64)  # (C, E)
        flat = log_cpt[:, children].reshape(k, n_edges, 4)
        per_edge = flat[:, np.arange(n_edges)[None, :], idx]  # (K, C, E)
        ll = ll + per_edge.sum(axis=2).T
    return ll


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1, keepdims=True)
    safe = np.where(np.isneginf(m), 0.0, m)
    out = np.log(np.exp(a - safe).sum(axis=1, keepdims=True)) + safe
    return np.where(np.isneginf(m), -np.inf, out)[:, 0]


def em_fit(
    matrix: RuleContextMatrix,
    k: int,
    iterations: int,
    alpha: float,
    seed: int,
    skeleton: Optional[ChowLiuTree] = None,
) -> Circuit:
    """Fit a K-component Chow-Liu mixture and compile it to a circuit.

    Records the unweighted training log-likelihood after the initial
    M-step and after every EM round on ``circuit.fit_log_likelihoods``;
    the sequence is non-decreasing up to numerical noise.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if k > matrix.n_contexts:
        raise ValueError(f"k={k} exceeds the number of contexts {matrix.n_contexts}")
    if skeleton is None:
        skeleton = learn_structure(matrix, alpha)
    data = matrix.to_dense()

    rng = np.random.default_rng(seed)
    resp = rng.dirichlet(np.ones(k), size=matrix.n_contexts) if k > 1 else np.ones((matrix.n_contexts, 1))

    log_mix, log_root, log_cpt = _m_step(data, resp, skeleton, alpha)
    history = []
    comp_ll = _component_loglik(data, skeleton, log_root, log_cpt)
    history.append(float(_logsumexp_rows(comp_ll + log_mix[None, :]).sum()))

    for it in range(iterations):
        joint = comp_ll + log_mix[None, :]
        log_norm = _logsumexp_rows(joint)
        resp = np.exp(joint - log_norm[:, None])
        cand = _m_step(data, resp, skeleton, alpha)
        cand_comp_ll = _component_loglik(data, skeleton, cand[1], cand[2])
        cand_ll = float(_logsumexp_rows(cand_comp_ll + cand[0][None, :]).sum())
        if cand_ll < history[-1]:
            # The smoothed (MAP-flavored) update stopped improving the raw
            # training likelihood; accepting it would break the monotone
            # contract, and re-running E from the same parameters can only
            # reproduce it. Stop here.
            logger.debug(
                "EM stopped at iteration %d: update would drop LL %.12g -> %.12g",
                it + 1, history[-1], cand_ll,
            )
            break
        log_mix, log_root, log_cpt = cand
        comp_ll = cand_comp_ll
        history.append(cand_ll)

    trees = [
        ChowLiuTree(
            root=skeleton.root,
            parents=skeleton.parents,
            order=skeleton.order,
            edge_mi=skeleton.edge_mi,
            log_root=log_root[comp],
            log_cpt=log_cpt[comp],
        )
        for comp in range(k)
    ]
    circuit = compile_trees(trees, list(log_mix))
    circuit.fit_log_likelihoods = history
    return circuit
