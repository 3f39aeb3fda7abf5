"""Corpus-level entropy analyses: most-frequent first-N procedure prefix tables
with per-step entropies, cluster-averaged trends for fixed-length admissions,
and deterministic CSV/JSON exports that round-trip byte-identically.

Frequencies are stored as raw fractions of all admissions; presentation units
(percent for N=1, per-mille for longer prefixes) are left to rendering.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass

from .corpus import Corpus
from .entropy import EntropyTrend, InitialEntropyMode, entropy_trend, prefix_entropies, \
    trends_to_csv, trends_from_csv
from .ioutils import atomic_write
from .seq2seq import Seq2SeqModel

SCHEMA_VERSION = 1
ALL_CLUSTER = "ALL"

CLUSTER_CSV_HEADER = ["cluster", "step", "mean_bits", "std_bits", "count"]


@dataclass
class NGramRow:
    """One prefix in a most-frequent-first-N table."""

    rank: int
    prefix: tuple[str, ...]
    cases: int
    frequency: float               # cases / total admissions
    entropy_after: list[float]     # entry m-1 = entropy after the first m procedures


@dataclass
class ClusterStep:
    step: int
    mean_bits: float | None
    std_bits: float | None
    count: int


@dataclass
class ClusterTrend:
    """Per-step mean/std entropy for admissions of one fixed length, grouped by
    primary diagnosis (or ALL)."""

    cluster_key: str
    length_filter: int
    per_step: list[ClusterStep]

    @property
    def count(self) -> int:
        return self.per_step[0].count if self.per_step else 0


def ngram_entropy_table(model: Seq2SeqModel, corpus: Corpus, n: int, top: int,
                        mode: InitialEntropyMode) -> list[NGramRow]:
    """Most frequent first-n procedure prefixes with their entropy drops.

    Counts admissions with at least n procedures by their first n codes,
    keeps the `top` most frequent (ties broken by lexicographic prefix), and
    computes the model entropy after each cumulative step of the prefix.
    """
    if n < 1 or top < 1:
        raise ValueError("n and top must be >= 1")
    counts = Counter(a.procedures[:n] for a in corpus.admissions if len(a.procedures) >= n)
    if not counts:
        raise ValueError(f"no admission has {n} or more procedures")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
    total = len(corpus.admissions)
    rows = []
    for rank, (prefix, cases) in enumerate(ranked, start=1):
        entropies = prefix_entropies(model, list(prefix), corpus, mode)[1:]
        rows.append(NGramRow(rank, prefix, cases, cases / total, entropies))
    return rows


def brute_force_prefix_counts(corpus: Corpus, n: int) -> dict[tuple[str, ...], int]:
    """Independent recount of first-n prefixes, used as a counting oracle in tests."""
    out: dict[tuple[str, ...], int] = {}
    for adm in corpus.admissions:
        if len(adm.procedures) < n:
            continue
        key = tuple(adm.procedures[:n])
        out[key] = out.get(key, 0) + 1
    return out


def cluster_trends(model: Seq2SeqModel, corpus: Corpus, length_filter: int,
                   cluster_keys: list[str], mode: InitialEntropyMode) -> list[ClusterTrend]:
    """Mean and population-std entropy trends for admissions with exactly
    `length_filter` procedures, clustered by primary diagnosis.

    The ALL cluster (every length-matching admission) is always included
    first. An empty cluster is emitted with count 0 and no statistics.
    """
    if length_filter < 1:
        raise ValueError(f"length_filter must be >= 1, got {length_filter}")
    eligible = [a for a in corpus.admissions if len(a.procedures) == length_filter]
    trend_cache = {a.id: entropy_trend(model, a, mode, corpus) for a in eligible}
    results = []
    for key in [ALL_CLUSTER] + [k for k in cluster_keys if k != ALL_CLUSTER]:
        members = eligible if key == ALL_CLUSTER else \
            [a for a in eligible if a.primary_diagnosis == key]
        steps: list[ClusterStep] = []
        for m in range(length_filter + 1):
            if not members:
                steps.append(ClusterStep(m, None, None, 0))
                continue
            values = [trend_cache[a.id].steps[m].entropy_bits for a in members]
            mean = sum(values) / len(values)
            var = sum((v - mean) ** 2 for v in values) / len(values)
            steps.append(ClusterStep(m, mean, math.sqrt(var), len(members)))
        results.append(ClusterTrend(key, length_filter, steps))
    return results


# --- exports ------------------------------------------------------------------

def _ngram_header(n: int) -> list[str]:
    return ["rank", "codes", "cases", "frequency"] + \
        [f"entropy_step_{m}" for m in range(1, n + 1)]


def ngram_table_to_csv(rows: list[NGramRow]) -> str:
    if not rows:
        raise ValueError("empty n-gram table")
    n = len(rows[0].prefix)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_ngram_header(n))
    for row in rows:
        writer.writerow([row.rank, " ".join(row.prefix), row.cases, repr(row.frequency)]
                        + [repr(e) for e in row.entropy_after])
    return buf.getvalue()


def ngram_table_from_csv(text: str) -> list[NGramRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    n = len(header) - 4
    if header != _ngram_header(n):
        raise ValueError(f"unexpected n-gram CSV header: {header}")
    return [
        NGramRow(int(rank), tuple(codes.split(" ")), int(cases), float(freq),
                 [float(e) for e in entropies])
        for rank, codes, cases, freq, *entropies in reader
    ]


def cluster_trends_to_csv(trends: list[ClusterTrend]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CLUSTER_CSV_HEADER)
    for trend in trends:
        for s in trend.per_step:
            writer.writerow([
                trend.cluster_key, s.step,
                "" if s.mean_bits is None else repr(s.mean_bits),
                "" if s.std_bits is None else repr(s.std_bits),
                s.count,
            ])
    return buf.getvalue()


def cluster_trends_from_csv(text: str) -> list[ClusterTrend]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CLUSTER_CSV_HEADER:
        raise ValueError(f"unexpected cluster CSV header: {header}")
    trends: list[ClusterTrend] = []
    for key, step, mean, std, count in reader:
        if not trends or trends[-1].cluster_key != key or int(step) == 0:
            trends.append(ClusterTrend(key, 0, []))
        trends[-1].per_step.append(ClusterStep(
            int(step),
            float(mean) if mean else None,
            float(std) if std else None,
            int(count),
        ))
    for trend in trends:
        trend.length_filter = trend.per_step[-1].step
    return trends


def _bundle_dict(obj) -> dict:
    if obj and isinstance(obj[0], NGramRow):
        return {"schema_version": SCHEMA_VERSION, "kind": "ngram_table", "rows": [
            {"rank": r.rank, "codes": list(r.prefix), "cases": r.cases,
             "frequency": r.frequency, "entropy_after": r.entropy_after}
            for r in obj
        ]}
    if obj and isinstance(obj[0], ClusterTrend):
        return {"schema_version": SCHEMA_VERSION, "kind": "cluster_trends", "rows": [
            {"cluster": t.cluster_key, "length_filter": t.length_filter, "per_step": [
                {"step": s.step, "mean_bits": s.mean_bits,
                 "std_bits": s.std_bits, "count": s.count}
                for s in t.per_step
            ]}
            for t in obj
        ]}
    if obj and isinstance(obj[0], EntropyTrend):
        return {"schema_version": SCHEMA_VERSION, "kind": "entropy_trends", "rows": [
            {"admission_id": t.admission_id, "steps": [
                {"step": s.step, "procedure_code": s.procedure_code,
                 "entropy_bits": s.entropy_bits}
                for s in t.steps
            ]}
            for t in obj
        ]}
    raise ValueError("nothing to export (empty or unrecognized payload)")


def export_trend_bundle(obj: list, path: str, fmt: str = "csv") -> None:
    """Write n-gram tables, cluster trends, or entropy trends as CSV or JSON.

    Output is canonical: exporting, parsing, and re-exporting yields identical
    bytes.
    """
    if fmt == "csv":
        if obj and isinstance(obj[0], NGramRow):
            text = ngram_table_to_csv(obj)
        elif obj and isinstance(obj[0], ClusterTrend):
            text = cluster_trends_to_csv(obj)
        elif obj and isinstance(obj[0], EntropyTrend):
            text = trends_to_csv(obj)
        else:
            raise ValueError("nothing to export (empty or unrecognized payload)")
    elif fmt == "json":
        text = json.dumps(_bundle_dict(obj), sort_keys=True, indent=2) + "\n"
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    atomic_write(path, text.encode("utf-8"))


__all__ = [
    "NGramRow", "ClusterStep", "ClusterTrend", "ALL_CLUSTER",
    "ngram_entropy_table", "brute_force_prefix_counts", "cluster_trends",
    "ngram_table_to_csv", "ngram_table_from_csv",
    "cluster_trends_to_csv", "cluster_trends_from_csv",
    "trends_to_csv", "trends_from_csv",
    "export_trend_bundle",
]
