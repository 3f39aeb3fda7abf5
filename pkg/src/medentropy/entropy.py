"""Uncertainty quantification: Shannon entropy of diagnosis distributions and
per-admission entropy trends over cumulative procedure prefixes.

All entropies are in bits (base 2). A trend walks the prefixes of one
admission's procedure list: step 0 is the initial entropy convention (before
any procedure), step m is the entropy of the predicted first-diagnosis
distribution after the first m procedures.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus import Admission, Corpus
from .seq2seq import Seq2SeqModel, first_distribution

ENTROPY_FLOOR = 1e-12  # probabilities below this contribute 0 (the 0*log0 convention)
_SUM_TOL = 1e-6

TREND_CSV_HEADER = ["admission_id", "step", "procedure_code", "entropy_bits"]


class InitialEntropyMode(str, Enum):
    """Convention for the step-0 entropy, before any procedure is received."""

    UNIFORM_PROCEDURE = "uniform-proc"
    UNIFORM_DIAGNOSIS = "uniform-diag"
    EMPIRICAL_FREQUENCY = "empirical"


def shannon_entropy(dist) -> float:
    """Shannon entropy in bits of a probability vector.

    Requires entries summing to 1 within 1e-6; entries below the floor are
    treated as exact zeros.
    """
    p = np.asarray(dist, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("empty distribution")
    if p.min() < -_SUM_TOL:
        raise ValueError(f"negative probability {p.min()!r}")
    total = p.sum()
    if abs(total - 1.0) > _SUM_TOL:
        raise ValueError(f"distribution sums to {total!r}, expected 1")
    p = p[p > ENTROPY_FLOOR]
    return float(-(p * np.log2(p)).sum() + 0.0)


def initial_entropy(mode: InitialEntropyMode, corpus: Corpus) -> float:
    """Step-0 entropy under the chosen convention."""
    if mode is InitialEntropyMode.UNIFORM_PROCEDURE:
        return math.log2(corpus.proc_vocab.non_reserved_size)
    if mode is InitialEntropyMode.UNIFORM_DIAGNOSIS:
        return math.log2(corpus.diag_vocab.non_reserved_size)
    counts = corpus.first_procedure_frequencies()
    if not counts:
        raise ValueError("empirical initial entropy needs a non-empty corpus")
    total = sum(counts.values())
    return shannon_entropy([c / total for c in counts.values()])


@dataclass(frozen=True)
class TrendStep:
    step: int
    procedure_code: str | None  # None at step 0
    entropy_bits: float


@dataclass
class EntropyTrend:
    """Entropies e_0..e_M over one admission's cumulative procedure prefixes."""

    admission_id: str
    steps: list[TrendStep]


def entropy_trend(model: Seq2SeqModel, admission: Admission,
                  mode: InitialEntropyMode, corpus: Corpus) -> EntropyTrend:
    """Entropy after each cumulative prefix of the admission's procedures.

    An admission with M procedures yields M+1 steps, step 0 being the initial
    entropy. Unknown codes are fed to the model as UNK.
    """
    if not admission.procedures:
        raise ValueError(f"admission {admission.id!r} has no procedures")
    steps = [TrendStep(0, None, initial_entropy(mode, corpus))]
    indices = [corpus.proc_vocab.index(c) for c in admission.procedures]
    for m in range(1, len(indices) + 1):
        dist = first_distribution(model, indices[:m])
        steps.append(TrendStep(m, admission.procedures[m - 1], shannon_entropy(dist)))
    return EntropyTrend(admission.id, steps)


def prefix_entropies(model: Seq2SeqModel, codes: list[str], corpus: Corpus,
                     mode: InitialEntropyMode) -> list[float]:
    """[initial] ++ [entropy after each cumulative prefix of `codes`]."""
    trend = entropy_trend(model, Admission("query", tuple(codes), ("_",)), mode, corpus) \
        if codes else None
    if trend is None:
        return [initial_entropy(mode, corpus)]
    return [s.entropy_bits for s in trend.steps]


def trends_to_csv(trends: list[EntropyTrend]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TREND_CSV_HEADER)
    for trend in trends:
        for s in trend.steps:
            writer.writerow([trend.admission_id, s.step,
                             s.procedure_code or "", repr(s.entropy_bits)])
    return buf.getvalue()


def trends_from_csv(text: str) -> list[EntropyTrend]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != TREND_CSV_HEADER:
        raise ValueError(f"unexpected trend CSV header: {header}")
    trends: list[EntropyTrend] = []
    for admission_id, step, code, bits in reader:
        if not trends or trends[-1].admission_id != admission_id or int(step) == 0:
            trends.append(EntropyTrend(admission_id, []))
        trends[-1].steps.append(TrendStep(int(step), code or None, float(bits)))
    return trends
