"""Probabilistic-circuit-guided rule selection for knowledge graph completion.

Pipeline: load triples and Horn rules, abduce per-training-triple rule
contexts into a binary association matrix, learn a mixture-of-Chow-Liu-
trees circuit over rule activations, generate singleton or greedy rule
sets from circuit marginals, score test queries (PC1/PC2/PC3 vs. a
confidence baseline), and evaluate with filtered Hits@k / MRR@k.
"""

from .chowliu import ChowLiuTree, learn_structure
from .circuit import (
    Circuit,
    compile_trees,
    empirical_circuit,
    load_circuit,
    log_likelihood,
    query_marginal,
    query_marginal_batch,
    save_circuit,
    singleton_marginals,
)
from .config import RunConfig
from .contexts import (
    EmpiricalContextDistribution,
    RuleContextMatrix,
    build_matrix,
    exact_marginal,
    load_matrix,
    lower_bound_marginal,
    save_matrix,
)
from .em import em_fit
from .errors import (
    CircuitStructureError,
    EmptyProgramError,
    RuleCircuitError,
    RuleParseError,
    StageError,
    TripleParseError,
)
from .evaluation import EvalResult, hits_at_k, mrr_at_k, rank_of_truth, sweep
from .grounding import abduce_rules, naive_groundings, predict_candidates
from .kg import Triple, TripleStore, Vocabulary, load_triples, lookup
from .oracle import (
    NilssonInstance,
    oracle_query_prob,
    verify_nilsson,
    verify_prop1,
    verify_prop2,
    verify_sandwich,
)
from .rules import Atom, Rule, RuleProgram, filter_rules, parse_rule_file
from .rulesets import RulesetCollection, greedy_rulesets, load_rulesets, save_rulesets, singleton_rulesets
from .scoring import (
    Query,
    RankedPrediction,
    baseline_order,
    collect_firings,
    queries_for_triple,
    read_prediction_file,
    score_baseline,
    score_pc1,
    score_pc2,
    score_pc3,
    upper_bound,
    write_prediction_file,
)

__version__ = "0.1.0"
