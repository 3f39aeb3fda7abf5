#!/usr/bin/env python3
"""Render the exported entropy artifacts as readable tables.

Machine formats keep frequencies as raw fractions; this report applies the
presentation units (percent for single procedures, per-mille for longer
prefixes) and prints per-cluster trend summaries for admissions of one length.
"""

import argparse
import os

from medentropy.analysis import (
    cluster_trends, cluster_trends_to_csv, ngram_table_from_csv,
)
from medentropy.corpus import load_jsonl, split
from medentropy.entropy import InitialEntropyMode
from medentropy.ioutils import atomic_write
from medentropy.seq2seq import load_checkpoint


def print_ngram_table(path: str, n: int) -> None:
    rows = ngram_table_from_csv(open(path).read())
    unit = "%" if n == 1 else "‰"
    scale = 100 if n == 1 else 1000
    print(f"\nMost frequent first {n} procedure(s)")
    header = ["#", "codes", "cases", f"freq {unit}"] + \
        [f"H after {m}" for m in range(1, n + 1)]
    print("  ".join(f"{h:>10}" for h in header))
    for row in rows:
        cells = [str(row.rank), " ".join(row.prefix), str(row.cases),
                 f"{row.frequency * scale:.2f}"] + \
            [f"{e:.4f}" for e in row.entropy_after]
        print("  ".join(f"{c:>10}" for c in cells))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir", help="directory produced by run_pipeline.sh")
    parser.add_argument("--length", type=int, default=5,
                        help="admission length for the cluster trend summary")
    parser.add_argument("--clusters", default="",
                        help="comma-separated primary-diagnosis codes to cluster by")
    args = parser.parse_args()

    for n in (1, 2, 3):
        path = os.path.join(args.run_dir, f"ngram_{n}.csv")
        if os.path.exists(path):
            print_ngram_table(path, n)

    corpus_path = os.path.join(args.run_dir, "corpus.jsonl")
    ckpt_path = os.path.join(args.run_dir, "model.ckpt")
    if not (os.path.exists(corpus_path) and os.path.exists(ckpt_path)):
        return
    loaded, _ = load_jsonl(corpus_path)
    corpus = split(loaded, (0.8, 0.1, 0.1), 42)
    model = load_checkpoint(ckpt_path, corpus.proc_vocab, corpus.diag_vocab)

    keys = [k for k in args.clusters.split(",") if k]
    if not keys:
        # default: the two most common primary diagnoses among length-matched cases
        from collections import Counter
        counts = Counter(a.primary_diagnosis for a in corpus.admissions
                         if len(a.procedures) == args.length)
        keys = [code for code, _ in counts.most_common(2)]
    trends = cluster_trends(model, corpus, args.length, keys,
                            InitialEntropyMode.UNIFORM_PROCEDURE)
    out = os.path.join(args.run_dir, f"cluster_trends_len{args.length}.csv")
    atomic_write(out, cluster_trends_to_csv(trends).encode("utf-8"))

    print(f"\nMean entropy trend, admissions with exactly {args.length} procedures")
    print("  ".join(f"{h:>12}" for h in ["cluster", "cases"] +
                    [f"step {m}" for m in range(args.length + 1)]))
    for trend in trends:
        cells = [trend.cluster_key, str(trend.count)]
        for step in trend.per_step:
            cells.append("-" if step.mean_bits is None
                         else f"{step.mean_bits:.3f}±{step.std_bits:.3f}")
        print("  ".join(f"{c:>12}" for c in cells))
    print(f"\nwrote {out}")


if __name__ == "__main__":
    main()
