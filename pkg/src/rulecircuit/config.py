"""Run configuration, stage fingerprints, and atomic artifact writes.

Each pipeline stage fingerprints the slice of the resolved configuration
that determines its output, chained onto the upstream stage's fingerprint.
Artifacts embed the fingerprint as a leading ``#fingerprint=`` comment
where their format tolerates comments, and every artifact gets a
``<name>.meta.json`` sidecar with the fingerprint plus the resolved
config slice. A later stage refuses an upstream artifact whose recorded
fingerprint does not match the current configuration unless forced.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass

from ._io import atomic_write_text
from .errors import StageError

VALID_METHODS = ("pc1", "pc2", "pc3", "baseline")


@dataclass
class RunConfig:
    dataset: str = "dataset"
    train_path: str = ""
    valid_path: str = ""
    test_path: str = ""
    rules_path: str = ""
    min_confidence: float = 0.0
    min_support: int = 0
    materialize_inverse: bool = False
    k: int = 4
    alpha: float = 1.0
    em_iterations: int = 10
    seed: int = 0
    delta: float = 0.1
    methods: tuple[str, ...] = ("pc1", "pc2", "baseline")
    rule_counts: tuple[int, ...] = (100, 500)
    top_k: int = 1000
    mrr_k: int = 1000
    output_dir: str = "run"
    threads: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError("min_confidence must be in [0, 1]")
        if self.min_support < 0:
            raise ValueError("min_support must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.em_iterations < 0:
            raise ValueError("em_iterations must be >= 0")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must be in [0, 1]")
        if self.top_k < 1 or self.mrr_k < 1:
            raise ValueError("top_k and mrr_k must be >= 1")
        self.methods = tuple(self.methods)
        for m in self.methods:
            if m not in VALID_METHODS:
                raise ValueError(f"unknown method {m!r}; valid: {VALID_METHODS}")
        self.rule_counts = tuple(int(n) for n in self.rule_counts)
        if any(n < 1 for n in self.rule_counts):
            raise ValueError("rule counts must be >= 1")

    # ------------------------------------------------------------------
    # fingerprints (chained per stage)
    # ------------------------------------------------------------------

    def _digest(self, payload: dict) -> str:
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def fingerprint_matrix(self) -> str:
        return self._digest(
            {
                "stage": "matrix",
                "dataset": self.dataset,
                "train": self.train_path,
                "rules": self.rules_path,
                "min_confidence": self.min_confidence,
                "min_support": self.min_support,
                "materialize_inverse": self.materialize_inverse,
            }
        )

    def fingerprint_circuit(self) -> str:
        return self._digest(
            {
                "stage": "circuit",
                "upstream": self.fingerprint_matrix(),
                "k": self.k,
                "alpha": self.alpha,
                "em_iterations": self.em_iterations,
                "seed": self.seed,
            }
        )

    def fingerprint_rulesets(self) -> str:
        return self._digest(
            {"stage": "rulesets", "upstream": self.fingerprint_circuit(), "delta": self.delta}
        )

    def fingerprint_predictions(self) -> str:
        return self._digest(
            {
                "stage": "predictions",
                "upstream": self.fingerprint_circuit(),
                "rulesets": self.fingerprint_rulesets(),
                "methods": list(self.methods),
                "rule_counts": list(self.rule_counts),
                "top_k": self.top_k,
                "test": self.test_path,
            }
        )

    def fingerprint_metrics(self) -> str:
        return self._digest(
            {
                "stage": "metrics",
                "upstream": self.fingerprint_predictions(),
                "valid": self.valid_path,
                "mrr_k": self.mrr_k,
            }
        )

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        d["rule_counts"] = list(self.rule_counts)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def write_meta(artifact_path: str, stage: str, fingerprint: str, config: RunConfig) -> None:
    meta = {"stage": stage, "fingerprint": fingerprint, "config": config.to_dict()}
    atomic_write_text(artifact_path + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def check_meta(artifact_path: str, stage: str, expected_fingerprint: str, force: bool) -> None:
    """Refuse an upstream artifact with a mismatched fingerprint unless forced."""
    if not os.path.exists(artifact_path):
        raise StageError(
            f"missing {stage} artifact {artifact_path}; run the earlier pipeline stage first"
        )
    meta_path = artifact_path + ".meta.json"
    if not os.path.exists(meta_path):
        if force:
            return
        raise StageError(f"missing metadata {meta_path}; rerun the stage or pass --force")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("fingerprint") != expected_fingerprint:
        if force:
            return
        raise StageError(
            f"{artifact_path} was produced by config fingerprint {meta.get('fingerprint')} "
            f"but the current config expects {expected_fingerprint}; "
            "rerun the earlier stage or pass --force"
        )
