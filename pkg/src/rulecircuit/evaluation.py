"""Filtered-ranking evaluation: Hits@k and MRR@k over prediction files.

Candidates that form a known triple in any filter store (other than the
truth itself) are removed before ranking. Tie handling is pessimistic: a
surviving competitor with a score equal to the truth's counts as ranked
ahead. Every test triple contributes one head- and one tail-prediction
query, each with its own rank.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .kg import TripleStore
from .scoring import read_prediction_file

logger = logging.getLogger(__name__)

HITS_KS = (1, 3, 10)
DEFAULT_MRR_K = 1000


def rank_of_truth(
    candidates: Sequence[tuple[str, float]],
    truth: str,
    known: str,
    relation: str,
    direction: str,
    filter_stores: Sequence[TripleStore],
) -> Optional[int]:
    """Pessimistic filtered rank of the truth, or None when absent.

    ``candidates`` are (entity, score) pairs from a scorer; ``direction``
    says which slot of the triple the candidates fill ("tail" for
    (known, relation, e), "head" for (e, relation, known)).
    """
    truth_score = None
    for entity, score in candidates:
        if entity == truth:
            truth_score = score
            break
    if truth_score is None:
        return None

    def is_known(entity: str) -> bool:
        for store in filter_stores:
            r = store.relations.get(relation)
            e = store.entities.get(entity)
            k = store.entities.get(known)
            if r is None or e is None or k is None:
                continue
            if direction == "tail" and store.contains(k, r, e):
                return True
            if direction == "head" and store.contains(e, r, k):
                return True
        return False

    ahead = 0
    for entity, score in candidates:
        if entity == truth:
            continue
        if score < truth_score:
            continue
        if is_known(entity):
            continue
        ahead += 1
    return ahead + 1


def hits_at_k(ranks: Sequence[Optional[int]], k: int) -> float:
    """Fraction of queries whose rank is within k; absent ranks miss."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not ranks:
        raise ValueError("empty test set")
    return sum(1 for r in ranks if r is not None and r <= k) / len(ranks)


def mrr_at_k(ranks: Sequence[Optional[int]], k: int) -> float:
    """Mean reciprocal rank, zeroed beyond k; absent ranks contribute 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not ranks:
        raise ValueError("empty test set")
    return sum(1.0 / r for r in ranks if r is not None and r <= k) / len(ranks)


@dataclass
class EvalResult:
    dataset: str
    method: str
    top_n: int
    hits1: float
    hits3: float
    hits10: float
    mrr: float
    n_queries: int


def evaluate_prediction_file(
    path: str,
    filter_stores: Sequence[TripleStore],
    mrr_k: int = DEFAULT_MRR_K,
) -> tuple[list[Optional[int]], int]:
    """All (head and tail) query ranks from one prediction file."""
    ranks: list[Optional[int]] = []
    for (h, r, t), head_cands, tail_cands in read_prediction_file(path):
        ranks.append(rank_of_truth(head_cands, h, t, r, "head", filter_stores))
        ranks.append(rank_of_truth(tail_cands, t, h, r, "tail", filter_stores))
    return ranks, len(ranks)


def sweep(
    entries: Sequence[tuple[str, str, int, str]],
    filter_stores: Sequence[TripleStore],
    mrr_k: int = DEFAULT_MRR_K,
) -> tuple[list[EvalResult], list[str]]:
    """Evaluate (dataset, method, top_n, prediction-path) rows.

    Returns results in input order plus a list of per-row error messages;
    a missing prediction file skips its row and the run continues.
    Duplicate (dataset, method, top_n) combinations are an error.
    """
    seen: set[tuple[str, str, int]] = set()
    for dataset, method, top_n, _ in entries:
        key = (dataset, method, top_n)
        if key in seen:
            raise ValueError(f"duplicate sweep entry {key}")
        seen.add(key)

    results: list[EvalResult] = []
    errors: list[str] = []
    for dataset, method, top_n, path in entries:
        try:
            ranks, n = evaluate_prediction_file(path, filter_stores, mrr_k)
        except OSError as exc:
            msg = f"{dataset}/{method}/top{top_n}: {exc}"
            errors.append(msg)
            logger.error("%s", msg)
            continue
        results.append(
            EvalResult(
                dataset=dataset,
                method=method,
                top_n=top_n,
                hits1=hits_at_k(ranks, 1),
                hits3=hits_at_k(ranks, 3),
                hits10=hits_at_k(ranks, 10),
                mrr=mrr_at_k(ranks, mrr_k),
                n_queries=n,
            )
        )
    return results, errors


def write_metrics_csv(results: Iterable[EvalResult], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "method", "top_n", "hits1", "hits3", "hits10", "mrr"])
        for r in results:
            writer.writerow(
                [r.dataset, r.method, r.top_n]
                + [f"{v:.6f}" for v in (r.hits1, r.hits3, r.hits10, r.mrr)]
            )
