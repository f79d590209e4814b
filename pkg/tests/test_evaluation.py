import pytest

from rulecircuit.evaluation import (
    evaluate_prediction_file,
    hits_at_k,
    mrr_at_k,
    rank_of_truth,
    sweep,
    write_metrics_csv,
)
from rulecircuit.scoring import write_prediction_file

from conftest import make_store


def rank(cands, truth, filters=(), known="x", relation="r", direction="tail"):
    return rank_of_truth(cands, truth, known, relation, direction, list(filters))


def test_truth_scored_highest_is_rank_one():
    assert rank([("b", 0.9), ("c", 0.5)], "b") == 1


def test_filtering_removes_known_true_competitors():
    train = make_store([("x", "r", "c"), ("x", "r", "d")])
    cands = [("c", 0.9), ("d", 0.8), ("b", 0.5)]
    assert rank(cands, "b") == 3
    assert rank(cands, "b", filters=[train]) == 1


def test_head_direction_filtering():
    train = make_store([("c", "r", "x")])
    cands = [("c", 0.9), ("b", 0.5)]
    assert rank(cands, "b", filters=[train], direction="head") == 1
    assert rank(cands, "b", filters=[train], direction="tail") == 2


def test_truth_absent_from_candidates():
    assert rank([("c", 0.9)], "b") is None
    assert rank([], "b") is None


def test_pessimistic_ties_count_against_truth():
    assert rank([("b", 0.5), ("c", 0.5)], "b") == 2
    assert rank([("c", 0.5), ("b", 0.5)], "b") == 2


def test_truth_itself_never_filtered():
    stores = [make_store([("x", "r", "b")])]
    assert rank([("b", 0.9)], "b", filters=stores) == 1


def test_hits_at_k_examples():
    assert hits_at_k([1, 1, 1], 1) == 1.0
    assert hits_at_k([1, 2, None], 1) == pytest.approx(1 / 3)
    assert hits_at_k([1, 2, 4], 3) == pytest.approx(2 / 3)


def test_mrr_at_k_examples():
    assert mrr_at_k([1, 2, 4], 10) == pytest.approx(0.583333, abs=5e-7)
    assert mrr_at_k([1, 2, 4], 3) == pytest.approx(0.5)
    assert mrr_at_k([None, None], 5) == 0.0


def test_metrics_reject_empty_or_bad_k():
    for fn in (hits_at_k, mrr_at_k):
        with pytest.raises(ValueError):
            fn([], 3)
        with pytest.raises(ValueError):
            fn([1], 0)


def test_metric_monotonicity_in_k():
    ranks = [1, 2, 5, 9, None, 40, 3, 3]
    for k in range(1, 45):
        assert hits_at_k(ranks, k) <= hits_at_k(ranks, k + 1) + 1e-15
        assert mrr_at_k(ranks, k) <= mrr_at_k(ranks, k + 1) + 1e-15
        assert mrr_at_k(ranks, k) <= hits_at_k(ranks, k) + 1e-15


def _write_predictions(path, store, records):
    """records: list of (triple, head-cands, tail-cands) with (name, score)."""
    from rulecircuit.scoring import Candidate, Query, RankedPrediction

    entries = []
    for (h, r, t), heads, tails in records:
        hq = Query(direction="head", known=t, relation=r, truth=h)
        tq = Query(direction="tail", known=h, relation=r, truth=t)
        mk = lambda q, cands: RankedPrediction(
            query=q,
            candidates=[
                Candidate(entity=store.entities.get(n), score=s, firing=()) for n, s in cands
            ],
        )
        entries.append(((h, r, t), mk(hq, heads), mk(tq, tails)))
    write_prediction_file(str(path), entries, store)


def test_head_tail_symmetry(tmp_path):
    store = make_store([("a", "r", "b"), ("c", "r", "b"), ("a", "r", "d")])
    fwd = [
        (("a", "r", "b"), [("a", 0.9), ("c", 0.8)], [("d", 0.7), ("b", 0.6)]),
    ]
    # swap heads and tails everywhere, including the filter store
    swapped_store = make_store([("b", "r", "a"), ("b", "r", "c"), ("d", "r", "a")])
    bwd = [
        (("b", "r", "a"), [("d", 0.7), ("b", 0.6)], [("a", 0.9), ("c", 0.8)]),
    ]
    _write_predictions(tmp_path / "fwd.txt", store, fwd)
    _write_predictions(tmp_path / "bwd.txt", swapped_store, bwd)
    ranks_fwd, _ = evaluate_prediction_file(str(tmp_path / "fwd.txt"), [store])
    ranks_bwd, _ = evaluate_prediction_file(str(tmp_path / "bwd.txt"), [swapped_store])
    assert sorted(ranks_fwd, key=str) == sorted(ranks_bwd, key=str)


def test_rank_ignores_candidates_below_truth(tmp_path):
    store = make_store([("a", "r", "b"), ("a", "r", "z"), ("c", "r", "d")])
    recs = [(("a", "r", "b"), [("a", 1.0)], [("b", 0.9), ("c", 0.5), ("d", 0.4)])]
    recs_reordered = [(("a", "r", "b"), [("a", 1.0)], [("b", 0.9), ("d", 0.4), ("c", 0.5)])]
    _write_predictions(tmp_path / "one.txt", store, recs)
    _write_predictions(tmp_path / "two.txt", store, recs_reordered)
    r1, _ = evaluate_prediction_file(str(tmp_path / "one.txt"), [store])
    r2, _ = evaluate_prediction_file(str(tmp_path / "two.txt"), [store])
    assert r1 == r2


def test_sweep_rows_errors_and_csv(tmp_path):
    store = make_store([("a", "r", "b")])
    recs = [(("a", "r", "b"), [("a", 1.0)], [("b", 0.9)])]
    p1 = tmp_path / "m100.txt"
    _write_predictions(p1, store, recs)
    entries = [
        ("toy", "pc1", 100, str(p1)),
        ("toy", "pc1", 500, str(tmp_path / "missing.txt")),
    ]
    results, errors = sweep(entries, [store])
    assert len(results) == 1 and len(errors) == 1
    assert "missing" in errors[0]
    assert results[0].hits1 == 1.0 and results[0].n_queries == 2

    with pytest.raises(ValueError, match="duplicate"):
        sweep(entries + [("toy", "pc1", 100, str(p1))], [store])

    csv_path = tmp_path / "metrics.csv"
    write_metrics_csv(results, str(csv_path))
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "dataset,method,top_n,hits1,hits3,hits10,mrr"
    assert lines[1] == "toy,pc1,100,1.000000,1.000000,1.000000,1.000000"


def test_sweep_rows_rederivable_from_files(tmp_path):
    """CSV numbers must be recomputable from the prediction file by an
    independent reader."""
    store = make_store([("a", "r", "b"), ("a", "r", "c"), ("d", "r", "b")])
    recs = [
        (("a", "r", "b"), [("d", 0.9), ("a", 0.8)], [("c", 0.9), ("b", 0.7)]),
        (("d", "r", "b"), [("d", 0.6)], [("b", 0.4)]),
    ]
    path = tmp_path / "pred.txt"
    _write_predictions(path, store, recs)
    results, _ = sweep([("toy", "pc2", 10, str(path))], [store])

    # independent recomputation with a bare-bones parser
    raw = path.read_text().strip().split("\n")
    ranks = []
    known = {("a", "r", "b"), ("a", "r", "c"), ("d", "r", "b")}
    for i in range(0, len(raw), 3):
        h, r, t = raw[i].split("\t")
        for line, truth, mk in ((raw[i + 1], h, lambda e: (e, r, t)),
                                (raw[i + 2], t, lambda e: (h, r, e))):
            parts = line.split("\t")[1:]
            cands = [(parts[j], float(parts[j + 1])) for j in range(0, len(parts), 2)]
            t_score = dict(cands).get(truth)
            if t_score is None:
                ranks.append(None)
                continue
            ahead = sum(
                1 for e, s in cands
                if e != truth and s >= t_score and (mk(e) not in known or mk(e) == (h, r, t))
            )
            ranks.append(ahead + 1)
    assert results[0].hits1 == pytest.approx(hits_at_k(ranks, 1))
    assert results[0].hits10 == pytest.approx(hits_at_k(ranks, 10))
    assert results[0].mrr == pytest.approx(mrr_at_k(ranks, 1000))
