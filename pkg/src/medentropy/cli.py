"""Command-line pipeline: synthesize corpora, train, evaluate, export entropy
trends and n-gram tables, and launch the inference service.

Every file-producing run writes a manifest (resolved configuration, seed, and
corpus fingerprint) next to its primary output; `rerun <manifest>` reproduces
the run byte-identically. Flags override values from an optional JSON config
file, which overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

from . import analysis, corpus as corpus_mod, entropy as entropy_mod, metrics as metrics_mod
from . import seq2seq
from .corpus import CorpusError, GeneratorSpec
from .entropy import InitialEntropyMode
from .ioutils import atomic_write
from .nncore import AdamHyper
from .seq2seq import CheckpointError, ModelConfig

MANIFEST_VERSION = 1

DEFAULTS = {
    "seed": 42,
    "layers": 1,
    "attention": "on",
    "teacher_forcing": "on",
    "embed_dim": 32,
    "hidden_dim": 64,
    "epochs": 30,
    "batch_size": 16,
    "lr": 1e-3,
    "initial_entropy": "uniform-proc",
    "max_decode_len": 16,
    "min_count": 1,
    "split_ratios": "0.8,0.1,0.1",
}


class CliError(ValueError):
    """User-facing failure: reported as one line on stderr, exit 1."""


def _flag(value: str) -> bool:
    if value not in ("on", "off"):
        raise CliError(f"expected 'on' or 'off', got {value!r}")
    return value == "on"


def _ratios(value: str) -> tuple[float, float, float]:
    parts = value.split(",")
    if len(parts) != 3:
        raise CliError(f"expected three comma-separated ratios, got {value!r}")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults <- config file <- explicit flags into one resolved dict."""
    resolved = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(DEFAULTS)
        if unknown:
            raise CliError(f"unknown config file keys: {sorted(unknown)}")
        resolved.update(file_values)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _load_corpus(path: str, cfg: dict) -> corpus_mod.Corpus:
    loaded, summary = corpus_mod.load_jsonl(path, min_count=int(cfg["min_count"]))
    if summary.rejected_empty:
        print(f"warning: rejected {summary.rejected_empty} admissions with empty code lists",
              file=sys.stderr)
    return corpus_mod.split(loaded, _ratios(cfg["split_ratios"]), int(cfg["seed"]))


def _initial_mode(cfg: dict) -> InitialEntropyMode:
    try:
        return InitialEntropyMode(cfg["initial_entropy"])
    except ValueError:
        raise CliError(f"unknown initial-entropy mode {cfg['initial_entropy']!r}") from None


def write_manifest(command: str, cfg: dict, inputs: dict, outputs: list[str],
                   corpus_fingerprint: int | None) -> str:
    manifest = {
        "schema_version": MANIFEST_VERSION,
        "command": command,
        "config": cfg,
        "inputs": inputs,
        "outputs": outputs,
        "seed": int(cfg["seed"]),
        "corpus_fingerprint": None if corpus_fingerprint is None
        else f"{corpus_fingerprint:016x}",
    }
    path = outputs[0] + ".manifest.json"
    atomic_write(path, (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode("utf-8"))
    return path


def cmd_synth(cfg: dict, inputs: dict) -> None:
    spec = GeneratorSpec.from_json(inputs["spec"])
    generated = corpus_mod.synth_generate(spec, int(inputs["n"]))
    out = inputs["out"]
    buf = io.StringIO()
    for adm in generated.admissions:
        buf.write(json.dumps({"admission_id": adm.id, "procedures": list(adm.procedures),
                              "diagnoses": list(adm.diagnoses)}) + "\n")
    atomic_write(out, buf.getvalue().encode("utf-8"))
    write_manifest("synth", cfg, inputs, [out], generated.fingerprint())
    print(f"wrote {len(generated.admissions)} admissions to {out}")


def cmd_train(cfg: dict, inputs: dict) -> None:
    data = _load_corpus(inputs["corpus"], cfg)
    config = ModelConfig(
        embed_dim=int(cfg["embed_dim"]),
        hidden_dim=int(cfg["hidden_dim"]),
        num_layers=int(cfg["layers"]),
        attention=_flag(cfg["attention"]),
        teacher_forcing=_flag(cfg["teacher_forcing"]),
        proc_vocab_size=len(data.proc_vocab),
        diag_vocab_size=len(data.diag_vocab),
        max_decode_len=int(cfg["max_decode_len"]),
        seed=int(cfg["seed"]),
    )
    model = seq2seq.Seq2SeqModel(config)
    hyper = AdamHyper(learning_rate=float(cfg["lr"]))
    model, history = seq2seq.train(model, data, int(cfg["epochs"]), int(cfg["batch_size"]), hyper)
    for epoch, loss in enumerate(history):
        print(f"epoch {epoch}: loss {loss:.6f}")
    out = inputs["out"]
    seq2seq.save_checkpoint(model, out, data.proc_vocab, data.diag_vocab)
    write_manifest("train", cfg, inputs, [out], data.fingerprint())
    print(f"saved checkpoint to {out}")


def cmd_eval(cfg: dict, inputs: dict) -> None:
    data = _load_corpus(inputs["corpus"], cfg)
    model = seq2seq.load_checkpoint(inputs["checkpoint"], data.proc_vocab, data.diag_vocab)
    report = metrics_mod.evaluate(model, data, inputs["split"])
    text = report.to_json()
    if inputs.get("out"):
        atomic_write(inputs["out"], text.encode("utf-8"))
        write_manifest("eval", cfg, inputs, [inputs["out"]], data.fingerprint())
    else:
        sys.stdout.write(text)


def cmd_trend(cfg: dict, inputs: dict) -> None:
    data = _load_corpus(inputs["corpus"], cfg)
    model = seq2seq.load_checkpoint(inputs["checkpoint"], data.proc_vocab, data.diag_vocab)
    mode = _initial_mode(cfg)
    if inputs.get("all"):
        admissions = list(data.admissions)
    else:
        wanted = inputs.get("admission")
        admissions = [a for a in data.admissions if a.id == wanted]
        if not admissions:
            raise CliError(f"admission {wanted!r} not found in corpus")
    trends = [entropy_mod.entropy_trend(model, a, mode, data) for a in admissions]
    out = inputs["out"]
    analysis.export_trend_bundle(trends, out, inputs.get("format", "csv"))
    write_manifest("trend", cfg, inputs, [out], data.fingerprint())


def cmd_ngram(cfg: dict, inputs: dict) -> None:
    data = _load_corpus(inputs["corpus"], cfg)
    model = seq2seq.load_checkpoint(inputs["checkpoint"], data.proc_vocab, data.diag_vocab)
    rows = analysis.ngram_entropy_table(model, data, int(inputs["n"]), int(inputs["top"]),
                                        _initial_mode(cfg))
    out = inputs["out"]
    analysis.export_trend_bundle(rows, out, inputs.get("format", "csv"))
    write_manifest("ngram", cfg, inputs, [out], data.fingerprint())


def cmd_serve(cfg: dict, inputs: dict) -> None:
    import uvicorn

    from .service import create_app

    data = _load_corpus(inputs["corpus"], cfg)
    model = seq2seq.load_checkpoint(inputs["checkpoint"], data.proc_vocab, data.diag_vocab)
    app = create_app(model, data, _initial_mode(cfg))
    host, _, port = inputs["bind"].partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "trend": cmd_trend,
    "ngram": cmd_ngram,
    "serve": cmd_serve,
}


def cmd_rerun(manifest_path: str) -> None:
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != MANIFEST_VERSION:
        raise CliError(f"unsupported manifest schema_version {manifest.get('schema_version')!r}")
    command = manifest["command"]
    if command not in COMMANDS:
        raise CliError(f"manifest names unknown command {command!r}")
    COMMANDS[command](manifest["config"], manifest["inputs"])


def _add_shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--layers", type=int, choices=(1, 2, 3))
    parser.add_argument("--attention", choices=("on", "off"))
    parser.add_argument("--teacher-forcing", dest="teacher_forcing", choices=("on", "off"))
    parser.add_argument("--embed-dim", dest="embed_dim", type=int)
    parser.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--initial-entropy", dest="initial_entropy",
                        choices=[m.value for m in InitialEntropyMode])
    parser.add_argument("--max-decode-len", dest="max_decode_len", type=int)
    parser.add_argument("--min-count", dest="min_count", type=int)
    parser.add_argument("--split-ratios", dest="split_ratios",
                        help="train,val,test fractions (default 0.8,0.1,0.1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medentropy",
                                     description="Diagnosis-uncertainty pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus JSONL from a generator spec")
    p.add_argument("spec", help="generator spec JSON")
    p.add_argument("--n", type=int, required=True, help="number of admissions")
    p.add_argument("--out", required=True, help="output corpus JSONL path")
    _add_shared_flags(p)

    p = sub.add_parser("train", help="train a predictor and save a checkpoint")
    p.add_argument("corpus", help="corpus JSONL")
    p.add_argument("--checkpoint-out", dest="out", required=True)
    _add_shared_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    p.add_argument("corpus")
    p.add_argument("checkpoint")
    p.add_argument("--split", choices=corpus_mod.SPLIT_NAMES, default="test")
    p.add_argument("--out", help="write the report here instead of stdout")
    _add_shared_flags(p)

    p = sub.add_parser("trend", help="export entropy trends as CSV/JSON")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--admission", help="single admission id")
    group.add_argument("--all", action="store_true", help="every admission")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_shared_flags(p)

    p = sub.add_parser("ngram", help="export the most-frequent first-N prefix entropy table")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_shared_flags(p)

    p = sub.add_parser("serve", help="start the HTTP inference service")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("--bind", default="127.0.0.1:8080")
    _add_shared_flags(p)

    p = sub.add_parser("rerun", help="reproduce a previous run from its manifest")
    p.add_argument("manifest")

    return parser


def _inputs_from_args(args: argparse.Namespace) -> dict:
    keys = ("spec", "corpus", "checkpoint", "out", "n", "top", "split", "admission",
            "all", "format", "bind")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            cmd_rerun(args.manifest)
        else:
            cfg = resolve_config(args)
            COMMANDS[args.command](cfg, _inputs_from_args(args))
    except (CliError, CorpusError, CheckpointError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
