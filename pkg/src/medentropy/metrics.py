"""Evaluation metrics for the diagnosis predictor: set F1, Jaccard index, and
First-N accuracy (overlap of the first N predictions with the first N ground
truths), plus a corpus-level evaluation runner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .corpus import Corpus
from .seq2seq import Seq2SeqModel, greedy_decode

FIRST_N_LEVELS = (1, 2, 3)


def _require_truth(truth: list[str]) -> None:
    if not truth:
        raise ValueError("ground-truth diagnosis list must be non-empty")


def f1_set(predicted: list[str], truth: list[str]) -> float:
    """Set-based F1 on deduplicated code lists; empty prediction scores 0."""
    _require_truth(truth)
    p, t = set(predicted), set(truth)
    if not p:
        return 0.0
    inter = len(p & t)
    precision = inter / len(p)
    recall = inter / len(t)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def jaccard(predicted: list[str], truth: list[str]) -> float:
    """Intersection over union on deduplicated code lists."""
    _require_truth(truth)
    p, t = set(predicted), set(truth)
    if not p and not t:
        return 0.0
    return len(p & t) / len(p | t)


def first_n_accuracy(predicted: list[str], truth: list[str], n: int) -> float:
    """Overlap of the first min(n, available) predictions with the first
    min(n, available) truths, normalized by min(n, |truth|). Rewards full
    recovery of short ground-truth lists.
    """
    _require_truth(truth)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    p = set(predicted[:min(n, len(predicted))])
    t = set(truth[:min(n, len(truth))])
    return len(p & t) / min(n, len(truth))


@dataclass
class MetricsReport:
    f1: float
    jaccard: float
    first_n: dict[int, float]
    n_evaluated: int

    def to_dict(self) -> dict:
        return {
            "f1": self.f1,
            "jaccard": self.jaccard,
            "first_n": {str(n): v for n, v in self.first_n.items()},
            "n_evaluated": self.n_evaluated,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def evaluate(model: Seq2SeqModel, corpus: Corpus, split: str) -> MetricsReport:
    """Greedy-decode every admission in the split and macro-average each metric."""
    admissions = corpus.split_admissions(split)
    if not admissions:
        raise ValueError(f"split {split!r} is empty")
    sums = {"f1": 0.0, "jaccard": 0.0}
    first_sums = {n: 0.0 for n in FIRST_N_LEVELS}
    for adm in admissions:
        indices = [corpus.proc_vocab.index(c) for c in adm.procedures]
        predicted = [corpus.diag_vocab.code(i) for i in greedy_decode(model, indices)]
        truth = list(adm.diagnoses)
        sums["f1"] += f1_set(predicted, truth)
        sums["jaccard"] += jaccard(predicted, truth)
        for n in FIRST_N_LEVELS:
            first_sums[n] += first_n_accuracy(predicted, truth, n)
    count = len(admissions)
    return MetricsReport(
        f1=sums["f1"] / count,
        jaccard=sums["jaccard"] / count,
        first_n={n: s / count for n, s in first_sums.items()},
        n_evaluated=count,
    )
