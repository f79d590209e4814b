"""Horn-rule model and the AnyBURL-style rule file parser.

Rule file grammar, one rule per line (blank lines skipped):

    bodyGroundings<TAB>support<TAB>confidence<TAB>head(T1,T2) <= atom1, atom2

Terms that are single uppercase letters are variables; any other token is
an entity constant. The stated confidence must match support/bodyGroundings
within 1e-6. Bodies are capped at three atoms and must be connected: each
body atom shares a variable with the head or an earlier body atom.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import EmptyProgramError, RuleParseError

MAX_BODY_ATOMS = 3

_ATOM_RE = re.compile(r"\s*([^\s(),]+)\(\s*([^\s(),]+)\s*,\s*([^\s(),]+)\s*\)\s*")


def is_variable(term: str) -> bool:
    return len(term) == 1 and "A" <= term <= "Z"


class Atom(NamedTuple):
    relation: str
    subject: str
    object: str

    def variables(self) -> set[str]:
        return {t for t in (self.subject, self.object) if is_variable(t)}

    def __str__(self) -> str:
        return f"{self.relation}({self.subject},{self.object})"


@dataclass(frozen=True)
class Rule:
    """One parsed Horn rule with its mining statistics.

    ``id`` is the dense index inside the owning program; ``origin`` is the
    id the rule had before any filtering, kept as provenance.
    """

    id: int
    head: Atom
    body: tuple[Atom, ...]
    confidence: float
    support: int
    body_groundings: int
    origin: int = -1

    def __str__(self) -> str:
        return f"{self.head} <= {', '.join(map(str, self.body))}"


class RuleProgram:
    """Ordered rule collection with dense ids 0..len-1."""

    def __init__(self, rules: Iterable[Rule]):
        self.rules: tuple[Rule, ...] = tuple(rules)
        for i, r in enumerate(self.rules):
            if r.id != i:
                raise ValueError(f"rule {i} carries id {r.id}; ids must be dense")
        self._by_head_relation: dict[str, list[Rule]] = {}
        for r in self.rules:
            self._by_head_relation.setdefault(r.head.relation, []).append(r)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __getitem__(self, idx: int) -> Rule:
        return self.rules[idx]

    def rules_for_head(self, relation: str) -> list[Rule]:
        return self._by_head_relation.get(relation, [])


def _parse_atom(text: str, line_no: int, offset: int) -> tuple[Atom, int]:
    m = _ATOM_RE.match(text)
    if not m:
        raise RuleParseError(f"cannot parse atom at {text[:30]!r}", line_no, offset + 1)
    return Atom(m.group(1), m.group(2), m.group(3)), m.end()


def _parse_rule_string(text: str, line_no: int, col0: int) -> tuple[Atom, tuple[Atom, ...]]:
    sep = text.find("<=")
    if sep < 0:
        raise RuleParseError("missing '<=' separator", line_no, col0 + 1)
    head_txt, body_txt = text[:sep], text[sep + 2 :]
    head, consumed = _parse_atom(head_txt, line_no, col0)
    if head_txt[consumed:].strip():
        raise RuleParseError("trailing text after head atom", line_no, col0 + consumed + 1)

    body: list[Atom] = []
    pos = 0
    while True:
        atom, used = _parse_atom(body_txt[pos:], line_no, col0 + sep + 2 + pos)
        body.append(atom)
        pos += used
        rest = body_txt[pos:]
        if not rest.strip():
            break
        if not rest.lstrip().startswith(","):
            raise RuleParseError("expected ',' between body atoms", line_no, col0 + sep + 2 + pos + 1)
        pos += rest.index(",") + 1
        if not body_txt[pos:].strip():
            raise RuleParseError("trailing comma in body", line_no, col0 + sep + 2 + pos)
    return head, tuple(body)


def _validate_rule(head: Atom, body: tuple[Atom, ...], line_no: int) -> None:
    head_vars = head.variables()
    n_const = 2 - len([t for t in (head.subject, head.object) if is_variable(t)])
    if head.subject == head.object and is_variable(head.subject):
        raise RuleParseError(f"unsupported head shape {head}: repeated variable", line_no)
    if n_const == 2:
        raise RuleParseError(f"unsupported head shape {head}: constants-only head", line_no)
    if len(body) > MAX_BODY_ATOMS:
        raise RuleParseError(
            f"body has {len(body)} atoms; at most {MAX_BODY_ATOMS} supported", line_no
        )
    seen = set(head_vars)
    for atom in body:
        atom_vars = atom.variables()
        if seen and not (atom_vars & seen):
            raise RuleParseError(
                f"disconnected body atom {atom}: shares no variable with head or earlier atoms",
                line_no,
            )
        seen |= atom_vars
    body_vars = set().union(*(a.variables() for a in body)) if body else set()
    if not head_vars <= body_vars:
        raise RuleParseError(
            f"head variable(s) {sorted(head_vars - body_vars)} never occur in the body", line_no
        )


def parse_rule_file(path: str) -> RuleProgram:
    """Parse a rule file into a program, in file order.

    The confidence column is re-derived from the grounding counts and must
    agree with the stated value within 1e-6; duplicate (head, body) pairs
    are rejected.
    """
    rules: list[Rule] = []
    seen: dict[tuple, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise RuleParseError(
                    f"expected 4 TAB-separated fields, got {len(parts)}", line_no
                )
            bg_txt, sup_txt, conf_txt, rule_txt = parts
            try:
                body_groundings = int(bg_txt)
                support = int(sup_txt)
                confidence = float(conf_txt)
            except ValueError as exc:
                raise RuleParseError(f"bad numeric field: {exc}", line_no) from exc
            if body_groundings <= 0 or support < 0 or support > body_groundings:
                raise RuleParseError(
                    f"invalid counts support={support} bodyGroundings={body_groundings}", line_no
                )
            derived = support / body_groundings
            if abs(derived - confidence) > 1e-6:
                raise RuleParseError(
                    f"stated confidence {confidence} != support/bodyGroundings {derived:.8f}",
                    line_no,
                )
            col0 = len(bg_txt) + len(sup_txt) + len(conf_txt) + 3
            head, body = _parse_rule_string(rule_txt, line_no, col0)
            _validate_rule(head, body, line_no)
            key = (head, body)
            if key in seen:
                raise RuleParseError(
                    f"duplicate rule (first seen on line {seen[key]})", line_no
                )
            seen[key] = line_no
            rules.append(
                Rule(
                    id=len(rules),
                    head=head,
                    body=body,
                    confidence=derived,
                    support=support,
                    body_groundings=body_groundings,
                    origin=len(rules),
                )
            )
    if not rules:
        raise EmptyProgramError(f"{path}: no rules parsed")
    return RuleProgram(rules)


def filter_rules(program: RuleProgram, min_confidence: float, min_support: int) -> RuleProgram:
    """Keep rules meeting both thresholds, re-assigning dense ids.

    Raises EmptyProgramError when nothing survives: downstream learning is
    undefined on an empty program.
    """
    if not 0.0 <= min_confidence:
        raise ValueError(f"min_confidence must be >= 0, got {min_confidence}")
    if min_support < 0:
        raise ValueError(f"min_support must be >= 0, got {min_support}")
    kept = [r for r in program if r.confidence >= min_confidence and r.support >= min_support]
    if not kept:
        raise EmptyProgramError(
            f"no rules pass confidence >= {min_confidence} and support >= {min_support}"
        )
    return RuleProgram(
        Rule(
            id=i,
            head=r.head,
            body=r.body,
            confidence=r.confidence,
            support=r.support,
            body_groundings=r.body_groundings,
            origin=r.origin,
        )
        for i, r in enumerate(kept)
    )
