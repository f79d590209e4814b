#!/usr/bin/env python3
"""Regenerate the bundled datasets under data/.

Two fixtures, both fully deterministic:

* data/toy            -- a 20-triple family graph with a hand-picked rule
                         file; used by the CLI smoke tests.
* data/nations-synth  -- a synthetic knowledge graph matching the Nations
                         benchmark's published statistics (14 entities,
                         56 relations, 1,592 train / 201 test triples),
                         plus a rule file mined exhaustively from the
                         train split with exact support counts.

The synthetic graph has two relation tiers: a "core" tier whose relations
are noisy copies, inverses, and compositions of each other (high-coverage,
mid-confidence regularities that generalize to the test split), and a
"block" tier of near-duplicate relation clusters confined to small entity
blocks (they mine into many high-confidence rules with minimal coverage).
Confidence-sorted selection fills up on the block tier; activation-based
selection prefers the core tier. Rule statistics are exact counts over the
emitted train split, never invented.
"""

from __future__ import annotations

import os
import sys
from collections import defaultdict

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "data")

# ----------------------------------------------------------------------
# toy dataset
# ----------------------------------------------------------------------

TOY_TRAIN = [
    ("alice", "parent", "bob"),
    ("alice", "parent", "dana"),
    ("bob", "parent", "carol"),
    ("bob", "parent", "eli"),
    ("dana", "parent", "fay"),
    ("gus", "parent", "hana"),
    ("hana", "parent", "ivy"),
    ("bob", "child", "alice"),
    ("dana", "child", "alice"),
    ("carol", "child", "bob"),
    ("eli", "child", "bob"),
    ("fay", "child", "dana"),
    ("hana", "child", "gus"),
    ("ivy", "child", "hana"),
    ("alice", "grandparent", "carol"),
    ("alice", "grandparent", "eli"),
    ("gus", "grandparent", "ivy"),
    ("bob", "sibling", "dana"),
    ("dana", "sibling", "bob"),
    ("gus", "knows", "alice"),
]
TOY_VALID = [("carol", "sibling", "eli")]
TOY_TEST = [
    ("alice", "grandparent", "fay"),
    ("eli", "sibling", "carol"),
    ("alice", "knows", "gus"),
]
TOY_RULES = [
    ("grandparent(X,Y) <= parent(X,A), parent(A,Y)", ("grandparent", [("parent", "X", "A"), ("parent", "A", "Y")])),
    ("child(X,Y) <= parent(Y,X)", ("child", [("parent", "Y", "X")])),
    ("parent(X,Y) <= child(Y,X)", ("parent", [("child", "Y", "X")])),
    ("sibling(X,Y) <= child(X,A), parent(A,Y)", ("sibling", [("child", "X", "A"), ("parent", "A", "Y")])),
    ("sibling(X,Y) <= sibling(Y,X)", ("sibling", [("sibling", "Y", "X")])),
    ("knows(X,Y) <= knows(Y,X)", ("knows", [("knows", "Y", "X")])),
]


def _toy_rule_counts(triples, head_rel, body):
    """Exact (bodyGroundings, support) by brute force over entity pairs."""
    entities = sorted({h for h, _, _ in triples} | {t for _, _, t in triples})
    facts = set(triples)
    body_vars = sorted({v for _, s, o in body for v in (s, o) if len(v) == 1 and v.isupper()})
    pairs_body = set()
    pairs_both = set()
    import itertools

    for combo in itertools.product(entities, repeat=len(body_vars)):
        bind = dict(zip(body_vars, combo))
        if all((bind[s], rel, bind[o]) in facts for rel, s, o in body):
            xy = (bind["X"], bind["Y"])
            pairs_body.add(xy)
            if (bind["X"], head_rel, bind["Y"]) in facts:
                pairs_both.add(xy)
    return len(pairs_body), len(pairs_both)


def gen_toy() -> None:
    out = os.path.join(DATA, "toy")
    os.makedirs(out, exist_ok=True)
    _write_triples(os.path.join(out, "train.txt"), TOY_TRAIN)
    _write_triples(os.path.join(out, "valid.txt"), TOY_VALID)
    _write_triples(os.path.join(out, "test.txt"), TOY_TEST)
    lines = []
    for text, (head_rel, body) in TOY_RULES:
        bg, sup = _toy_rule_counts(TOY_TRAIN, head_rel, body)
        if bg == 0:
            raise RuntimeError(f"toy rule has no body groundings: {text}")
        lines.append(f"{bg}\t{sup}\t{sup / bg:.6f}\t{text}")
    with open(os.path.join(out, "rules.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"toy: {len(TOY_TRAIN)} train, {len(TOY_TEST)} test, {len(lines)} rules")


# ----------------------------------------------------------------------
# synthetic stats-matched benchmark graph
# ----------------------------------------------------------------------

N_ENTITIES = 14
N_RELATIONS = 56
N_TRAIN = 1592
N_TEST = 201
N_VALID = 100

N_CORE = 10          # relations with graph-wide structure
BLOCK_SIZES = (7, 7, 6, 6)   # entity blocks for the remaining relations
SEED = 20_240_817
MAX_RULES_PER_HEAD = 40


def _rand_pairs(rng, density, allowed=None):
    """Random ordered entity pairs (no self-loops) at the given density."""
    pairs = set()
    universe = allowed if allowed is not None else range(N_ENTITIES)
    for i in universe:
        for j in universe:
            if i != j and rng.random() < density:
                pairs.add((i, j))
    return pairs


def _mutate(rng, pairs, drop, add, allowed=None):
    """Copy a pair set with some pairs dropped and fresh random ones added."""
    out = {p for p in pairs if rng.random() > drop}
    universe = list(allowed) if allowed is not None else list(range(N_ENTITIES))
    n_add = rng.poisson(add)
    for _ in range(n_add):
        i, j = rng.choice(universe, size=2, replace=False)
        out.add((int(i), int(j)))
    return out


def _compose(a, b):
    out = set()
    byhead = defaultdict(set)
    for i, j in b:
        byhead[i].add(j)
    for i, j in a:
        for k in byhead[j]:
            if k != i:
                out.add((i, k))
    return out


def gen_graph(rng):
    """Full pair set per relation; returns {relation index: set of pairs}."""
    rel_pairs: dict[int, set] = {}

    # Core tier: two base graphs, the rest are noisy copies / inverses /
    # compositions of earlier core relations.
    rel_pairs[0] = _rand_pairs(rng, 0.50)
    rel_pairs[1] = _rand_pairs(rng, 0.42)
    recipes = [
        (2, "copy", 0), (3, "inv", 0), (4, "copy", 1), (5, "inv", 1),
        (6, "comp", (0, 1)), (7, "comp", (1, 0)), (8, "copy", 2), (9, "comp", (0, 0)),
    ]
    for rel, kind, src in recipes:
        if kind == "copy":
            base = rel_pairs[src]
        elif kind == "inv":
            base = {(j, i) for i, j in rel_pairs[src]}
        else:
            base = _compose(rel_pairs[src[0]], rel_pairs[src[1]])
        rel_pairs[rel] = _mutate(rng, base, drop=0.30, add=10)

    # Block tier: clusters of near-duplicate relations confined to a block
    # (blocks wrap around the entity range and may overlap).
    blocks = []
    offset = 0
    for size in BLOCK_SIZES:
        blocks.append([(offset + i) % N_ENTITIES for i in range(size)])
        offset += 4
    rel = N_CORE
    while rel < N_RELATIONS:
        block = blocks[rel % len(blocks)]
        base = _rand_pairs(rng, 0.73, allowed=block)
        cluster = min(4, N_RELATIONS - rel)
        for k in range(cluster):
            rel_pairs[rel + k] = _mutate(rng, base, drop=0.04 * k, add=0.3, allowed=block)
        rel += cluster
    return rel_pairs


def split_graph(rng, rel_pairs):
    """Deterministic train/valid/test split hitting the exact sizes."""
    all_triples = []
    for rel in range(N_RELATIONS):
        for i, j in sorted(rel_pairs[rel]):
            all_triples.append((i, rel, j))
    total_needed = N_TRAIN + N_TEST + N_VALID
    if len(all_triples) < total_needed:
        raise RuntimeError(
            f"graph has {len(all_triples)} triples, need {total_needed}; raise densities"
        )

    # Test and valid lean on the core tier, which is where the structure
    # generalizes; block-tier triples appear too, at a lower rate.
    core = [t for t in all_triples if t[1] < N_CORE]
    block = [t for t in all_triples if t[1] >= N_CORE]
    rng.shuffle(core)
    rng.shuffle(block)

    n_core_test = int(round(N_TEST * 0.85))
    n_core_valid = int(round(N_VALID * 0.85))
    test = core[:n_core_test] + block[: N_TEST - n_core_test]
    valid = (
        core[n_core_test : n_core_test + n_core_valid]
        + block[N_TEST - n_core_test : N_TEST - n_core_test + N_VALID - n_core_valid]
    )
    held = set(test) | set(valid)
    train = [t for t in all_triples if t not in held]

    # Every entity and relation must stay in train (vocabulary anchor);
    # trim or pad block-tier train triples to the exact count.
    rng.shuffle(train)
    keep = []
    seen_rel = set()
    seen_ent = set()
    deferred = []
    for t in train:
        i, rel, j = t
        if rel not in seen_rel or i not in seen_ent or j not in seen_ent:
            keep.append(t)
            seen_rel.add(rel)
            seen_ent.update((i, j))
        else:
            deferred.append(t)
    if len(seen_rel) < N_RELATIONS or len(seen_ent) < N_ENTITIES:
        raise RuntimeError("split lost a relation or entity from train")
    room = N_TRAIN - len(keep)
    if room < 0:
        raise RuntimeError("anchor triples alone exceed the train budget")
    if room > len(deferred):
        extra = room - len(deferred)
        pad = []
        while len(pad) < extra:
            i, j = rng.choice(N_ENTITIES, size=2, replace=False)
            rel = int(rng.integers(N_CORE, N_RELATIONS))
            t = (int(i), rel, int(j))
            if t not in held and t not in set(train) and t not in pad:
                pad.append(t)
        deferred.extend(pad)
    train = keep + deferred[:room]
    train.sort()
    test.sort()
    valid.sort()
    assert len(train) == N_TRAIN and len(test) == N_TEST and len(valid) == N_VALID
    assert not (set(train) & held)
    return train, valid, test


# -- exhaustive rule mining over adjacency matrices ---------------------


def mine_rules(train):
    """All rules of the supported shapes with exact counts on train.

    Shapes: copy r(X,Y)<=s(X,Y); inverse r(X,Y)<=s(Y,X); two-hop chain
    r(X,Y)<=s(X,A),t(A,Y); constant-head r(X,c)<=s(X,A) and r(X,c)<=s(A,X).
    Kept when bodyGroundings >= 10, support >= 10, confidence >= 0.25
    (the usual minimum-support mining regime).
    """
    adj = np.zeros((N_RELATIONS, N_ENTITIES, N_ENTITIES), dtype=bool)
    for i, rel, j in train:
        adj[rel, i, j] = True
    rules = []

    def emit(bg, sup, text):
        if bg >= 10 and sup >= 10 and sup / bg >= 0.25:
            rules.append((bg, sup, text))

    for r in range(N_RELATIONS):
        head = adj[r]
        for s in range(N_RELATIONS):
            if s != r:
                body = adj[s]
                emit(int(body.sum()), int((body & head).sum()), f"rel{r:02d}(X,Y) <= rel{s:02d}(X,Y)")
            binv = adj[s].T
            emit(int(binv.sum()), int((binv & head).sum()), f"rel{r:02d}(X,Y) <= rel{s:02d}(Y,X)")
    for r in range(N_RELATIONS):
        head = adj[r]
        for s in range(N_RELATIONS):
            reach_s = adj[s]
            for t in range(N_RELATIONS):
                pairs = reach_s @ adj[t]
                np.fill_diagonal(pairs, False)
                bg = int(pairs.sum())
                if bg < 8:
                    continue
                sup = int((pairs & head).sum())
                emit(bg, sup, f"rel{r:02d}(X,Y) <= rel{s:02d}(X,A), rel{t:02d}(A,Y)")
    for r in range(N_RELATIONS):
        for c in range(N_ENTITIES):
            head_col = adj[r, :, c]
            if not head_col.any():
                continue
            for s in range(N_RELATIONS):
                xs_fwd = adj[s].any(axis=1)
                emit(int(xs_fwd.sum()), int((xs_fwd & head_col).sum()),
                     f"rel{r:02d}(X,e{c:02d}) <= rel{s:02d}(X,A)")
                xs_bwd = adj[s].any(axis=0)
                emit(int(xs_bwd.sum()), int((xs_bwd & head_col).sum()),
                     f"rel{r:02d}(X,e{c:02d}) <= rel{s:02d}(A,X)")
    # Rank within each head relation and keep the best rules per head, the
    # way mining tools cap their output; then order the file by confidence.
    by_head = defaultdict(list)
    for bg, sup, text in rules:
        by_head[text.split("(")[0]].append((bg, sup, text))
    kept = []
    for head in sorted(by_head):
        ranked = sorted(by_head[head], key=lambda x: (-(x[1] / x[0]), -x[1], x[2]))
        kept.extend(ranked[:MAX_RULES_PER_HEAD])
    kept.sort(key=lambda x: (-(x[1] / x[0]), -x[1], x[2]))
    return kept


def _write_triples(path, triples):
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")


def gen_nations() -> None:
    rng = np.random.default_rng(SEED)
    rel_pairs = gen_graph(rng)
    train, valid, test = split_graph(rng, rel_pairs)

    def named(triples):
        return [(f"e{i:02d}", f"rel{r:02d}", f"e{j:02d}") for i, r, j in triples]

    out = os.path.join(DATA, "nations-synth")
    os.makedirs(out, exist_ok=True)
    _write_triples(os.path.join(out, "train.txt"), named(train))
    _write_triples(os.path.join(out, "valid.txt"), named(valid))
    _write_triples(os.path.join(out, "test.txt"), named(test))

    rules = mine_rules(train)
    with open(os.path.join(out, "rules.txt"), "w", encoding="utf-8") as fh:
        for bg, sup, text in rules:
            fh.write(f"{bg}\t{sup}\t{sup / bg:.6f}\t{text}\n")

    confs = np.array([sup / bg for bg, sup, _ in rules])
    print(
        f"nations-synth: {len(train)} train, {len(valid)} valid, {len(test)} test, "
        f"{len(rules)} rules (conf>=0.9: {(confs >= 0.9).sum()}, "
        f"conf>=0.5: {(confs >= 0.5).sum()})"
    )


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "all"
    if which in ("toy", "all"):
        gen_toy()
    if which in ("nations", "all"):
        gen_nations()
