"""Admission data model, corpus I/O, vocabularies, and a synthetic EHR generator.

An admission pairs an ordered procedure-code sequence (chronological) with an
ordered diagnosis-code sequence (priority order, first entry = primary
diagnosis). Corpora come from JSONL files, MIMIC-style CSV pairs, or the
latent-condition generator below, which is exactly enumerable and therefore
supports a brute-force Bayesian oracle for the conditional distribution of
the first diagnosis given any procedure prefix.
"""

from __future__ import annotations

import json
import math
import csv
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

# Reserved vocabulary slots, fixed for every vocabulary.
PAD, SOS, EOS, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<sos>", "<eos>", "<unk>")

SPLIT_NAMES = ("train", "val", "test")


class CorpusError(ValueError):
    """Raised for malformed corpus files, invalid generator specs, and impossible queries."""


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash, used to fingerprint vocabularies and corpora."""
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _check_code(code: object, where: str) -> str:
    if not isinstance(code, str) or not code or any(c.isspace() for c in code):
        raise CorpusError(f"{where}: invalid code {code!r} (must be non-empty, no whitespace)")
    return code


@dataclass(frozen=True)
class Admission:
    """One hospitalization: chronological procedures and priority-ordered diagnoses."""

    id: str
    procedures: tuple[str, ...]
    diagnoses: tuple[str, ...]

    @property
    def primary_diagnosis(self) -> str:
        return self.diagnoses[0]


class Vocab:
    """Bijective code<->index map with reserved PAD/SOS/EOS/UNK slots 0..3."""

    def __init__(self, codes: list[str]):
        self.index_to_code: list[str] = list(RESERVED_TOKENS) + list(codes)
        self.code_to_index: dict[str, int] = {c: i for i, c in enumerate(self.index_to_code)}
        if len(self.code_to_index) != len(self.index_to_code):
            raise CorpusError("vocab codes must be distinct (and not collide with reserved tokens)")

    def __len__(self) -> int:
        return len(self.index_to_code)

    @property
    def non_reserved_size(self) -> int:
        return len(self.index_to_code) - len(RESERVED_TOKENS)

    def index(self, code: str) -> int:
        """Index of a code; unknown codes map to UNK."""
        return self.code_to_index.get(code, UNK)

    def code(self, index: int) -> str:
        return self.index_to_code[index]

    def fingerprint(self) -> int:
        """FNV-1a over the ordered code list (reserved slots included)."""
        return fnv1a64("\x1f".join(self.index_to_code).encode("utf-8"))

    @classmethod
    def from_counts(cls, counts: Counter, min_count: int = 1) -> "Vocab":
        """Build from code frequencies: descending count, ties lexicographic."""
        kept = [c for c, n in counts.items() if n >= min_count]
        kept.sort(key=lambda c: (-counts[c], c))
        return cls(kept)


def build_vocabs(admissions: list[Admission], min_count: int = 1) -> tuple[Vocab, Vocab]:
    """Frequency-ordered vocabularies for procedures and diagnoses.

    Codes occurring fewer than `min_count` times are left out and map to UNK.
    Deterministic and invariant to admission order.
    """
    if min_count < 1:
        raise CorpusError(f"min_count must be >= 1, got {min_count}")
    if not admissions:
        raise CorpusError("cannot build vocabularies from an empty admission list")
    proc_counts: Counter = Counter()
    diag_counts: Counter = Counter()
    for adm in admissions:
        proc_counts.update(adm.procedures)
        diag_counts.update(adm.diagnoses)
    return Vocab.from_counts(proc_counts, min_count), Vocab.from_counts(diag_counts, min_count)


@dataclass
class LoadSummary:
    """Bookkeeping for a corpus load: what was kept and what was rejected."""

    loaded: int = 0
    rejected_empty: int = 0      # admissions with an empty procedure or diagnosis list
    rejected_rows: int = 0       # CSV rows dropped (bad seq_num)
    dropped_unpaired: int = 0    # admissions missing procedures or diagnoses after the join


@dataclass
class Corpus:
    """Immutable-by-convention bundle of admissions, vocabularies, and split assignment."""

    admissions: tuple[Admission, ...]
    proc_vocab: Vocab
    diag_vocab: Vocab
    split_of: dict[str, str] = field(default_factory=dict)

    def split_admissions(self, name: str) -> list[Admission]:
        if name not in SPLIT_NAMES:
            raise CorpusError(f"unknown split {name!r}, expected one of {SPLIT_NAMES}")
        return [a for a in self.admissions if self.split_of.get(a.id) == name]

    def stats(self) -> dict:
        lengths = [len(a.procedures) for a in self.admissions]
        return {
            "admissions": len(self.admissions),
            "procedure_vocab": self.proc_vocab.non_reserved_size,
            "diagnosis_vocab": self.diag_vocab.non_reserved_size,
            "mean_procedures": float(np.mean(lengths)) if lengths else 0.0,
            "max_procedures": max(lengths) if lengths else 0,
        }

    def fingerprint(self) -> int:
        blob = "\x1e".join(
            "\x1f".join((a.id, " ".join(a.procedures), " ".join(a.diagnoses)))
            for a in self.admissions
        )
        return fnv1a64(blob.encode("utf-8"))

    def procedure_frequencies(self) -> Counter:
        counts: Counter = Counter()
        for adm in self.admissions:
            counts.update(adm.procedures)
        return counts

    def first_procedure_frequencies(self) -> Counter:
        return Counter(a.procedures[0] for a in self.admissions if a.procedures)


def load_jsonl(path: str, min_count: int = 1) -> tuple[Corpus, LoadSummary]:
    """Load a corpus from JSONL: one object per line with `admission_id`,
    `procedures`, and `diagnoses`. Admissions with an empty list on either
    side are rejected and counted in the summary.
    """
    summary = LoadSummary()
    admissions: list[Admission] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            for fld in ("admission_id", "procedures", "diagnoses"):
                if fld not in obj:
                    raise CorpusError(f"line {lineno}: missing field {fld!r}")
            procs = [_check_code(c, f"line {lineno}") for c in obj["procedures"]]
            diags = [_check_code(c, f"line {lineno}") for c in obj["diagnoses"]]
            if not procs or not diags:
                summary.rejected_empty += 1
                continue
            admissions.append(Admission(str(obj["admission_id"]), tuple(procs), tuple(diags)))
            summary.loaded += 1
    if not admissions:
        raise CorpusError(f"{path}: no usable admissions")
    proc_vocab, diag_vocab = build_vocabs(admissions, min_count)
    return Corpus(tuple(admissions), proc_vocab, diag_vocab), summary


def save_jsonl(corpus: Corpus, path: str) -> None:
    """Inverse of load_jsonl; preserves admission order exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for adm in corpus.admissions:
            fh.write(json.dumps({
                "admission_id": adm.id,
                "procedures": list(adm.procedures),
                "diagnoses": list(adm.diagnoses),
            }) + "\n")


def _read_icd9_csv(path: str, summary: LoadSummary) -> dict[str, list[tuple[int, int, str]]]:
    """Read one MIMIC-style CSV, keeping icd_version=9 rows grouped by hadm_id.

    Rows keep their file position so equal seq_num values stay in file order.
    """
    required = ("hadm_id", "seq_num", "icd_code", "icd_version")
    grouped: dict[str, list[tuple[int, int, str]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise CorpusError(f"{path}: missing required column {col!r}")
        for pos, row in enumerate(reader):
            if str(row["icd_version"]).strip() != "9":
                continue
            try:
                seq = int(str(row["seq_num"]).strip())
            except ValueError:
                summary.rejected_rows += 1
                continue
            code = str(row["icd_code"]).strip()
            if not code:
                summary.rejected_rows += 1
                continue
            grouped.setdefault(str(row["hadm_id"]).strip(), []).append((seq, pos, code))
    return grouped


def load_mimic_csv(procedures_path: str, diagnoses_path: str,
                   min_count: int = 1) -> tuple[Corpus, LoadSummary]:
    """Join MIMIC-style procedure and diagnosis CSVs on hadm_id.

    Keeps ICD-9 rows only, orders codes by ascending seq_num, and drops
    admissions that end up without procedures or without diagnoses.
    """
    summary = LoadSummary()
    procs = _read_icd9_csv(procedures_path, summary)
    diags = _read_icd9_csv(diagnoses_path, summary)
    admissions = []
    for hadm_id in sorted(set(procs) | set(diags)):
        if hadm_id not in procs or hadm_id not in diags:
            summary.dropped_unpaired += 1
            continue
        p = [code for _, _, code in sorted(procs[hadm_id])]
        d = [code for _, _, code in sorted(diags[hadm_id])]
        admissions.append(Admission(hadm_id, tuple(p), tuple(d)))
        summary.loaded += 1
    if not admissions:
        raise CorpusError("no admissions with both ICD-9 procedures and diagnoses")
    proc_vocab, diag_vocab = build_vocabs(admissions, min_count)
    return Corpus(tuple(admissions), proc_vocab, diag_vocab), summary


def split(corpus: Corpus, ratios: tuple[float, float, float], seed: int) -> Corpus:
    """Assign train/val/test splits by a seeded permutation.

    Sizes are floor allocations of the ratios; the remainder goes to train.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise CorpusError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"ratios must sum to 1, got sum {sum(ratios)}")
    n = len(corpus.admissions)
    if n < 3:
        raise CorpusError(f"need at least 3 admissions to split, have {n}")
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test
    order = np.random.default_rng(seed).permutation(n)
    split_of: dict[str, str] = {}
    for rank, idx in enumerate(order):
        adm = corpus.admissions[idx]
        if rank < n_train:
            split_of[adm.id] = "train"
        elif rank < n_train + n_val:
            split_of[adm.id] = "val"
        else:
            split_of[adm.id] = "test"
    return Corpus(corpus.admissions, corpus.proc_vocab, corpus.diag_vocab, split_of)


# ---------------------------------------------------------------------------
# Synthetic generator: latent conditions, Markov procedure chains, and
# per-position diagnosis emissions. Small enough to enumerate exactly.
# ---------------------------------------------------------------------------

_SUM_TOL = 1e-9


def _check_distribution(dist: dict[str, float], what: str) -> None:
    if not dist:
        raise CorpusError(f"{what}: empty distribution")
    total = 0.0
    for code, p in dist.items():
        _check_code(code, what)
        if p < 0:
            raise CorpusError(f"{what}: negative probability for {code!r}")
        total += p
    if abs(total - 1.0) > _SUM_TOL:
        raise CorpusError(f"{what}: probabilities sum to {total!r}, expected 1")


@dataclass
class Condition:
    """One latent condition: prior, a procedure Markov chain, and diagnosis emissions.

    `transitions` may omit rows for terminal codes; a missing row means the
    sequence always stops there. `emissions[k]` is the distribution of the
    diagnosis code at priority position k.
    """

    name: str
    prior: float
    initial: dict[str, float]
    transitions: dict[str, dict[str, float]]
    stop_prob: float
    emissions: list[dict[str, float]]


@dataclass
class GeneratorSpec:
    """Fully specified synthetic world; deterministic given `seed`."""

    conditions: list[Condition]
    seed: int
    max_procedures: int

    def validate(self) -> None:
        if not self.conditions:
            raise CorpusError("generator spec: no conditions")
        if self.max_procedures < 1:
            raise CorpusError("generator spec: max_procedures must be >= 1")
        total_prior = sum(c.prior for c in self.conditions)
        if abs(total_prior - 1.0) > _SUM_TOL:
            raise CorpusError(f"generator spec: priors sum to {total_prior!r}, expected 1")
        for cond in self.conditions:
            if cond.prior < 0:
                raise CorpusError(f"condition {cond.name!r}: negative prior")
            if not 0.0 <= cond.stop_prob <= 1.0:
                raise CorpusError(f"condition {cond.name!r}: stop_prob outside [0, 1]")
            _check_distribution(cond.initial, f"condition {cond.name!r} initial")
            for code, row in cond.transitions.items():
                _check_distribution(row, f"condition {cond.name!r} transitions[{code!r}]")
            if not cond.emissions:
                raise CorpusError(f"condition {cond.name!r}: no diagnosis emissions")
            for k, dist in enumerate(cond.emissions):
                _check_distribution(dist, f"condition {cond.name!r} emissions[{k}]")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "max_procedures": self.max_procedures,
            "conditions": [
                {
                    "name": c.name,
                    "prior": c.prior,
                    "initial": c.initial,
                    "transitions": c.transitions,
                    "stop_prob": c.stop_prob,
                    "emissions": c.emissions,
                }
                for c in self.conditions
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GeneratorSpec":
        try:
            conditions = [
                Condition(
                    name=str(c.get("name", f"condition-{i}")),
                    prior=float(c["prior"]),
                    initial={str(k): float(v) for k, v in c["initial"].items()},
                    transitions={
                        str(k): {str(k2): float(v2) for k2, v2 in row.items()}
                        for k, row in c.get("transitions", {}).items()
                    },
                    stop_prob=float(c["stop_prob"]),
                    emissions=[{str(k): float(v) for k, v in d.items()} for d in c["emissions"]],
                )
                for i, c in enumerate(obj["conditions"])
            ]
            spec = cls(conditions=conditions, seed=int(obj["seed"]),
                       max_procedures=int(obj["max_procedures"]))
        except KeyError as exc:
            raise CorpusError(f"generator spec: missing field {exc.args[0]!r}") from exc
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, path: str) -> "GeneratorSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _sample_categorical(rng: np.random.Generator, dist: dict[str, float]) -> str:
    """Draw a key from a dict distribution, scanning entries in insertion order."""
    u = rng.random()
    acc = 0.0
    last = None
    for code, p in dist.items():
        acc += p
        last = code
        if u < acc:
            return code
    return last  # guard against accumulated rounding


def synth_generate(spec: GeneratorSpec, n: int) -> Corpus:
    """Sample n admissions from the generator; byte-identical for equal spec+seed."""
    spec.validate()
    if n < 1:
        raise CorpusError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(spec.seed)
    priors = {c.name: c.prior for c in spec.conditions}
    by_name = {c.name: c for c in spec.conditions}
    admissions = []
    for i in range(n):
        cond = by_name[_sample_categorical(rng, priors)]
        procs = [_sample_categorical(rng, cond.initial)]
        while len(procs) < spec.max_procedures:
            if rng.random() < cond.stop_prob:
                break
            row = cond.transitions.get(procs[-1])
            if row is None:
                break  # terminal code: no outgoing transitions
            procs.append(_sample_categorical(rng, row))
        diags = [_sample_categorical(rng, dist) for dist in cond.emissions]
        admissions.append(Admission(f"synth-{i:06d}", tuple(procs), tuple(diags)))
    proc_vocab, diag_vocab = build_vocabs(admissions, min_count=1)
    return Corpus(tuple(admissions), proc_vocab, diag_vocab)


def prefix_probability(cond: Condition, prefix: tuple[str, ...], max_procedures: int) -> float:
    """P(generated sequence begins with `prefix`) under one condition's chain."""
    if len(prefix) > max_procedures:
        return 0.0
    if not prefix:
        return 1.0
    p = cond.initial.get(prefix[0], 0.0)
    for prev, nxt in zip(prefix, prefix[1:]):
        if p == 0.0:
            return 0.0
        row = cond.transitions.get(prev)
        p *= (1.0 - cond.stop_prob) * (row.get(nxt, 0.0) if row else 0.0)
    return p


def oracle_first_dx_distribution(spec: GeneratorSpec, prefix: list[str]) -> dict[str, float]:
    """Exact posterior of the first diagnosis code given a procedure prefix.

    Enumerates conditions: P(d | prefix) is proportional to
    sum_c prior(c) * P(prefix is a sequence-prefix | c) * P(first dx = d | c).
    """
    key = tuple(prefix)
    weights = []
    total = 0.0
    for cond in spec.conditions:
        w = cond.prior * prefix_probability(cond, key, spec.max_procedures)
        weights.append(w)
        total += w
    if total <= 0.0:
        raise CorpusError(f"impossible prefix: {list(prefix)!r}")
    posterior: dict[str, float] = {}
    for cond, w in zip(spec.conditions, weights):
        if w == 0.0:
            continue
        for code, p in cond.emissions[0].items():
            if p > 0.0:
                posterior[code] = posterior.get(code, 0.0) + (w / total) * p
    return posterior


def oracle_entropy(spec: GeneratorSpec, prefix: list[str]) -> float:
    """Shannon entropy (bits) of the oracle's first-diagnosis posterior."""
    dist = oracle_first_dx_distribution(spec, prefix)
    return -sum(p * math.log2(p) for p in dist.values() if p > 1e-12) + 0.0


def enumerate_prefixes(spec: GeneratorSpec, max_len: int) -> dict[tuple[str, ...], float]:
    """All feasible procedure prefixes up to max_len with P(sequence starts with prefix).

    Intended for small, enumerable specs (oracle-side analyses and tests).
    """
    spec.validate()
    out: dict[tuple[str, ...], float] = {(): 1.0}
    frontier: list[tuple[str, ...]] = [()]
    for _ in range(min(max_len, spec.max_procedures)):
        nxt: list[tuple[str, ...]] = []
        for prefix in frontier:
            candidates: set[str] = set()
            for cond in spec.conditions:
                if not prefix:
                    candidates.update(k for k, v in cond.initial.items() if v > 0)
                else:
                    row = cond.transitions.get(prefix[-1], {})
                    candidates.update(k for k, v in row.items() if v > 0)
            for code in sorted(candidates):
                child = prefix + (code,)
                p = sum(c.prior * prefix_probability(c, child, spec.max_procedures)
                        for c in spec.conditions)
                if p > 0.0:
                    out[child] = p
                    nxt.append(child)
        frontier = nxt
    return out
