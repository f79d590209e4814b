"""Five-stage pipeline CLI with persisted, fingerprinted artifacts.

Subcommands: build-contexts, learn-pc, gen-rulesets, predict, evaluate,
verify. Flags override an optional ``--config`` JSON file; every stage
writes the resolved configuration next to its outputs, so a finished run
is reproducible from its own directory. ``RULECIRCUIT_SEED`` overrides
the configured seed. Stages run serially; ``--threads`` is recorded for
provenance and results never depend on it.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import circuit as circuit_mod
from . import contexts as contexts_mod
from ._io import atomic_write_text
from .config import RunConfig, check_meta, write_meta
from .em import em_fit
from .errors import RuleCircuitError, StageError
from .evaluation import sweep, write_metrics_csv
from .kg import TripleStore, load_triples
from .oracle import (
    CheckReport,
    oracle_query_prob,
    random_distribution,
    random_matrix,
    random_nilsson_instance,
    random_rule_subset,
    verify_nilsson,
    verify_prop1,
    verify_prop2,
    verify_sandwich,
)
from .rules import Atom, Rule, RuleProgram, filter_rules, parse_rule_file
from .rulesets import (
    RulesetCollection,
    greedy_rulesets,
    load_rulesets,
    save_rulesets,
    singleton_rulesets,
)
from .scoring import (
    baseline_order,
    collect_firings,
    queries_for_triple,
    score_baseline,
    score_pc1,
    score_pc2,
    score_pc3,
    write_prediction_file,
)

logger = logging.getLogger(__name__)


def _paths(config: RunConfig) -> dict[str, str]:
    out = config.output_dir
    return {
        "config": os.path.join(out, "config.json"),
        "matrix": os.path.join(out, "matrix.txt"),
        "circuit": os.path.join(out, "circuit.txt"),
        "rulesets": os.path.join(out, "rulesets-greedy.txt"),
        "singleton": os.path.join(out, "rulesets-singleton.txt"),
        "predictions": os.path.join(out, "predictions"),
        "metrics": os.path.join(out, "metrics.csv"),
        "verify": os.path.join(out, "verify-report.txt"),
    }


def prediction_path(config: RunConfig, method: str, top_n: int) -> str:
    return os.path.join(_paths(config)["predictions"], f"{method}-top{top_n}.txt")


def _load_program(config: RunConfig) -> RuleProgram:
    program = parse_rule_file(config.rules_path)
    return filter_rules(program, config.min_confidence, config.min_support)


def _load_train(config: RunConfig) -> TripleStore:
    return load_triples(config.train_path, role="train", materialize_inverse=config.materialize_inverse)


# ----------------------------------------------------------------------
# stages
# ----------------------------------------------------------------------


def cmd_build_contexts(config: RunConfig, force: bool = False) -> str:
    program = _load_program(config)
    train = _load_train(config)
    matrix = contexts_mod.build_matrix(program, train)
    paths = _paths(config)
    fp = config.fingerprint_matrix()
    contexts_mod.save_matrix(matrix, paths["matrix"], fingerprint=fp)
    write_meta(paths["matrix"], "matrix", fp, config)
    config.save(paths["config"])
    logger.info(
        "matrix: %d rules x %d contexts (%d active cells)",
        matrix.n_rules,
        matrix.n_contexts,
        sum(len(c) for c in matrix.columns),
    )
    return paths["matrix"]


def cmd_learn_pc(config: RunConfig, force: bool = False) -> str:
    paths = _paths(config)
    check_meta(paths["matrix"], "matrix", config.fingerprint_matrix(), force)
    matrix = contexts_mod.load_matrix(paths["matrix"])
    circ = em_fit(matrix, config.k, config.em_iterations, config.alpha, config.seed)
    fp = config.fingerprint_circuit()
    circuit_mod.save_circuit(circ, paths["circuit"], fingerprint=fp)
    write_meta(paths["circuit"], "circuit", fp, config)
    config.save(paths["config"])
    lls = circ.fit_log_likelihoods or []
    logger.info("circuit: %d nodes, LL %.6f -> %.6f", circ.n_nodes, lls[0], lls[-1])
    return paths["circuit"]


def cmd_gen_rulesets(config: RunConfig, force: bool = False) -> str:
    paths = _paths(config)
    check_meta(paths["circuit"], "circuit", config.fingerprint_circuit(), force)
    circ = circuit_mod.load_circuit(paths["circuit"])
    program = _load_program(config)
    fp = config.fingerprint_rulesets()

    singles = singleton_rulesets(circ, program)
    save_rulesets(singles, paths["singleton"], fingerprint=fp)
    write_meta(paths["singleton"], "rulesets", fp, config)
    out = paths["singleton"]

    if "pc3" in config.methods:
        # Greedy walks are quadratic in the rule count; only pay for them
        # when PC3 predictions were actually requested.
        greedy = greedy_rulesets(circ, program, config.delta)
        save_rulesets(greedy, paths["rulesets"], fingerprint=fp)
        write_meta(paths["rulesets"], "rulesets", fp, config)
        out = paths["rulesets"]
        logger.info(
            "rulesets: %d singleton, %d greedy walks, %d circuit queries",
            len(singles), len(greedy), greedy.query_count,
        )
    else:
        logger.info("rulesets: %d singleton (pc3 not requested, greedy skipped)", len(singles))
    config.save(paths["config"])
    return out


def cmd_predict(config: RunConfig, force: bool = False) -> list[str]:
    paths = _paths(config)
    check_meta(paths["circuit"], "circuit", config.fingerprint_circuit(), force)
    circ = circuit_mod.load_circuit(paths["circuit"])
    program = _load_program(config)
    train = _load_train(config)
    test = load_triples(config.test_path, role="test")

    pc_collection = singleton_rulesets(circ, program)
    marginals = np.array([0.0] * len(program))
    for s in pc_collection.sets:
        marginals[s.rule_ids[0]] = s.marginal
    pc_rule_order = [program[s.rule_ids[0]] for s in pc_collection.sets]
    conf_rule_order = baseline_order(program)

    greedy: Optional[RulesetCollection] = None
    if "pc3" in config.methods:
        check_meta(paths["rulesets"], "rulesets", config.fingerprint_rulesets(), force)
        greedy = load_rulesets(paths["rulesets"], method="greedy", delta=config.delta)

    fp = config.fingerprint_predictions()
    test_triples = [test.triple_names(t) for t in test.triples]
    bad_counts = [n for n in config.rule_counts if n > len(program)]
    if bad_counts:
        raise StageError(
            f"rule counts {bad_counts} exceed the filtered program size {len(program)}; "
            "lower the sweep values or relax the rule filters"
        )
    written = []
    for method in config.methods:
        for top_n in config.rule_counts:
            if method == "baseline":
                active_rules = conf_rule_order[:top_n]
            elif method == "pc3":
                subset = greedy.first_n(top_n)
                ids = sorted(subset.covered_rules())
                active_rules = [program[r] for r in ids]
            else:
                active_rules = pc_rule_order[:top_n]

            entries = []
            for h, r, t in test_triples:
                tail_q, head_q = queries_for_triple(h, r, t)
                preds = []
                for q in (head_q, tail_q):
                    if method == "baseline":
                        preds.append(score_baseline(q, active_rules, train, top_k=config.top_k))
                        continue
                    firings = collect_firings(q, active_rules, train)
                    if method == "pc1":
                        preds.append(score_pc1(q, firings, marginals, top_k=config.top_k))
                    elif method == "pc2":
                        preds.append(score_pc2(q, firings, circ, top_k=config.top_k))
                    else:
                        preds.append(score_pc3(q, firings, subset, top_k=config.top_k))
                entries.append(((h, r, t), preds[0], preds[1]))

            out_path = prediction_path(config, method, top_n)
            os.makedirs(os.path.dirname(out_path), exist_ok=True)
            write_prediction_file(out_path, entries, train, fingerprint=fp)
            write_meta(out_path, "predictions", fp, config)
            written.append(out_path)
            logger.info("predictions: %s", out_path)
    config.save(paths["config"])
    return written


def cmd_evaluate(config: RunConfig, force: bool = False) -> str:
    paths = _paths(config)
    fp_pred = config.fingerprint_predictions()
    entries = []
    for method in config.methods:
        for top_n in config.rule_counts:
            path = prediction_path(config, method, top_n)
            check_meta(path, "predictions", fp_pred, force)
            entries.append((config.dataset, method, top_n, path))

    filter_stores = [load_triples(config.train_path, role="train")]
    if config.valid_path:
        filter_stores.append(load_triples(config.valid_path, role="valid"))
    filter_stores.append(load_triples(config.test_path, role="test"))

    results, errors = sweep(entries, filter_stores, mrr_k=config.mrr_k)
    write_metrics_csv(results, paths["metrics"])
    write_meta(paths["metrics"], "metrics", config.fingerprint_metrics(), config)
    config.save(paths["config"])
    for err in errors:
        logger.error("evaluate: %s", err)
    logger.info("metrics: %s (%d rows, %d errors)", paths["metrics"], len(results), len(errors))
    return paths["metrics"]


def cmd_verify(config: RunConfig, force: bool = False) -> str:
    """Randomized oracle suites; desk-scale, independent of run artifacts."""
    rng = np.random.default_rng(config.seed)
    lines: list[str] = []

    def run_suite(name: str, n: int, one_check) -> None:
        failed = 0
        for _ in range(n):
            report = one_check()
            if not report.passed:
                failed += 1
                lines.append(f"  {report.line()}")
        status = "PASS" if failed == 0 else "FAIL"
        lines.append(f"{status} {name}: {n - failed}/{n} instances")

    def prop12_check() -> CheckReport:
        m = random_matrix(rng)
        d = random_distribution(rng, m.n_contexts)
        r = random_rule_subset(rng, m.n_rules)
        rep1 = verify_prop1(m, d, r)
        if not rep1.passed:
            return rep1
        return verify_prop2(m, d, random_rule_subset(rng, m.n_rules))

    def sandwich_check() -> CheckReport:
        m = random_matrix(rng, max_rules=8, max_contexts=16)
        d = random_distribution(rng, m.n_contexts)
        circ = circuit_mod.empirical_circuit(m, d)
        delta = float(rng.random())
        fake_program = _identity_program(m.n_rules)
        collection = greedy_rulesets(circ, fake_program, delta)
        fired = random_rule_subset(rng, m.n_rules, allow_empty=False)
        sets = [(s.rule_ids, s.marginal) for s in collection.sets]
        return verify_sandwich(m, d, sets, fired)

    def pc2_check() -> CheckReport:
        m = random_matrix(rng, max_rules=10, max_contexts=20)
        d = random_distribution(rng, m.n_contexts)
        circ = circuit_mod.empirical_circuit(m, d)
        fired = random_rule_subset(rng, m.n_rules, allow_empty=False)
        onecol = np.full((1, m.n_rules), -1, dtype=np.int8)
        onecol[0, sorted(fired)] = 0
        pc2 = 1.0 - float(circuit_mod.query_marginal_batch(circ, onecol)[0])
        direct = oracle_query_prob(m, d, fired)
        ok = abs(pc2 - direct) <= 1e-6
        return CheckReport("pc2-oracle", ok, 1,
                           counterexample=None if ok else f"pc2={pc2} oracle={direct}")

    run_suite("prop1+prop2 (randomized)", 1000, prop12_check)
    run_suite("prop3/prop4 sandwich (randomized)", 500, sandwich_check)
    run_suite("pc2 equals oracle (randomized)", 1000, pc2_check)
    run_suite("nilsson construction (randomized)", 50, lambda: verify_nilsson(random_nilsson_instance(rng)))

    paths = _paths(config)
    atomic_write_text(paths["verify"], "\n".join(lines) + "\n")
    for line in lines:
        print(line)
    if any(line.startswith("FAIL") for line in lines):
        raise StageError("oracle verification failed; see report")
    return paths["verify"]


def _identity_program(n_rules: int) -> RuleProgram:
    return RuleProgram(
        Rule(
            id=i,
            head=Atom(f"r{i}", "X", "Y"),
            body=(Atom(f"b{i}", "X", "Y"),),
            confidence=1.0,
            support=1,
            body_groundings=1,
            origin=i,
        )
        for i in range(n_rules)
    )


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

_STAGES = {
    "build-contexts": cmd_build_contexts,
    "learn-pc": cmd_learn_pc,
    "gen-rulesets": cmd_gen_rulesets,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "verify": cmd_verify,
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--dataset")
    parser.add_argument("--train")
    parser.add_argument("--valid")
    parser.add_argument("--test")
    parser.add_argument("--rules")
    parser.add_argument("--min-confidence", type=float)
    parser.add_argument("--min-support", type=int)
    parser.add_argument("--materialize-inverse", action="store_true", default=None)
    parser.add_argument("--k", type=int, help="mixture components")
    parser.add_argument("--alpha", type=float, help="smoothing pseudo-count")
    parser.add_argument("--em-iterations", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--delta", type=float, help="greedy-walk threshold")
    parser.add_argument("--methods", help="comma-separated subset of pc1,pc2,pc3,baseline")
    parser.add_argument("--rule-counts", help="comma-separated top-n sweep values")
    parser.add_argument("--top-k", type=int)
    parser.add_argument("--mrr-k", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--force", action="store_true", help="skip fingerprint checks")
    parser.add_argument("-v", "--verbose", action="store_true")


_FLAG_FIELDS = {
    "dataset": "dataset",
    "train": "train_path",
    "valid": "valid_path",
    "test": "test_path",
    "rules": "rules_path",
    "min_confidence": "min_confidence",
    "min_support": "min_support",
    "materialize_inverse": "materialize_inverse",
    "k": "k",
    "alpha": "alpha",
    "em_iterations": "em_iterations",
    "seed": "seed",
    "delta": "delta",
    "top_k": "top_k",
    "mrr_k": "mrr_k",
    "out": "output_dir",
    "threads": "threads",
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.load(args.config).to_dict() if args.config else RunConfig().to_dict()
    for flag, fld in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            base[fld] = value
    if getattr(args, "methods", None):
        base["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if getattr(args, "rule_counts", None):
        base["rule_counts"] = [int(n) for n in args.rule_counts.split(",")]
    env_seed = os.environ.get("RULECIRCUIT_SEED")
    if env_seed is not None:
        base["seed"] = int(env_seed)
    return RunConfig.from_dict(base)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="rulecircuit",
        description="Probabilistic-circuit-guided rule selection for KG completion",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _STAGES:
        stage_parser = sub.add_parser(name)
        _add_config_flags(stage_parser)
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = resolve_config(args)
        _STAGES[args.command](config, force=args.force)
    except (RuleCircuitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
