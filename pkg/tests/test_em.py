import numpy as np
import pytest

from rulecircuit.chowliu import learn_structure
from rulecircuit.circuit import compile_trees, log_likelihood, query_marginal, save_circuit
from rulecircuit.contexts import RuleContextMatrix
from rulecircuit.em import em_fit
from rulecircuit.oracle import random_matrix


def test_k1_zero_iterations_is_closed_form_chow_liu(fixture_f):
    fitted = em_fit(fixture_f, k=1, iterations=0, alpha=1.0, seed=9)
    closed = compile_trees([learn_structure(fixture_f, alpha=1.0)], [0.0])
    assert log_likelihood(fitted, fixture_f) == pytest.approx(
        log_likelihood(closed, fixture_f), abs=1e-12
    )
    assert fitted.fit_log_likelihoods[0] == pytest.approx(
        log_likelihood(fitted, fixture_f), abs=1e-9
    )


def test_em_log_likelihood_never_decreases(fixture_f):
    circuit = em_fit(fixture_f, k=2, iterations=10, alpha=1.0, seed=123)
    history = circuit.fit_log_likelihoods
    assert len(history) >= 1
    for earlier, later in zip(history, history[1:]):
        assert later >= earlier - 1e-9


def test_one_em_step_does_not_drop_likelihood():
    rng = np.random.default_rng(77)
    for trial in range(10):
        matrix = random_matrix(rng, max_rules=8, max_contexts=20, min_contexts=3)
        init = em_fit(matrix, k=3, iterations=0, alpha=1.0, seed=trial)
        stepped = em_fit(matrix, k=3, iterations=1, alpha=1.0, seed=trial)
        assert log_likelihood(stepped, matrix) >= log_likelihood(init, matrix) - 1e-9


def test_degenerate_concentration_on_repeated_column():
    matrix = RuleContextMatrix(n_rules=3, columns=[(0, 2)] * 8)
    circuit = em_fit(matrix, k=1, iterations=0, alpha=1e-9, seed=0)
    assert query_marginal(circuit, {0: 1, 1: 0, 2: 1}) == pytest.approx(1.0, abs=1e-6)


def test_k_larger_than_context_count_is_an_error(fixture_f):
    with pytest.raises(ValueError, match="exceeds"):
        em_fit(fixture_f, k=6, iterations=0, alpha=1.0, seed=0)
    with pytest.raises(ValueError):
        em_fit(fixture_f, k=0, iterations=0, alpha=1.0, seed=0)
    with pytest.raises(ValueError):
        em_fit(fixture_f, k=1, iterations=-1, alpha=1.0, seed=0)


def test_em_is_deterministic_given_seed(tmp_path, fixture_f):
    a = em_fit(fixture_f, k=3, iterations=7, alpha=1.0, seed=42)
    b = em_fit(fixture_f, k=3, iterations=7, alpha=1.0, seed=42)
    pa, pb = str(tmp_path / "a.txt"), str(tmp_path / "b.txt")
    save_circuit(a, pa)
    save_circuit(b, pb)
    assert open(pa).read() == open(pb).read()
    c = em_fit(fixture_f, k=3, iterations=7, alpha=1.0, seed=43)
    assert a.fit_log_likelihoods != c.fit_log_likelihoods


def test_structural_invariants_hold_after_em(fixture_f):
    for k in (1, 2, 4):
        circuit = em_fit(fixture_f, k=k, iterations=5, alpha=0.5, seed=k)
        circuit.validate()
