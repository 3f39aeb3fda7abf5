"""Stateless HTTP inference service: diagnosis distributions, entropy
trajectories over a procedure prefix, and what-if ranking of candidate next
procedures by posterior entropy.

The model and vocabularies are loaded once and shared read-only across
request handlers; every response is a pure function of the request body, so
identical concurrent requests yield identical bodies. Unknown codes are
accepted (mapped to UNK) and echoed back in a `warnings` array.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .corpus import Corpus
from .entropy import InitialEntropyMode, prefix_entropies, shannon_entropy
from .seq2seq import Seq2SeqModel, first_distribution

SCHEMA_VERSION = 1
DEFAULT_CANDIDATES = 20


class PredictRequest(BaseModel):
    procedures: list[str] = Field(default_factory=list)
    top_k: int = Field(default=10, ge=1)


class WhatIfRequest(BaseModel):
    prefix: list[str] = Field(default_factory=list)
    candidates: list[str] | None = None


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})


def _unknown_codes(codes: list[str], corpus: Corpus) -> list[str]:
    seen = []
    for c in codes:
        if c not in corpus.proc_vocab.code_to_index and c not in seen:
            seen.append(c)
    return seen


def top_candidates(corpus: Corpus, limit: int = DEFAULT_CANDIDATES) -> list[str]:
    """Most frequent procedure codes (ties lexicographic), for what-if defaults."""
    counts = corpus.procedure_frequencies()
    return [c for c, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:limit]]


def create_app(model: Seq2SeqModel | None, corpus: Corpus,
               mode: InitialEntropyMode = InitialEntropyMode.UNIFORM_PROCEDURE,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="medentropy", docs_url=None, redoc_url=None)
    state = {"model": model, "corpus": corpus, "mode": mode}

    class ModelNotLoaded(Exception):
        pass

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(_request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", str(exc.errors()[:1]))

    @app.exception_handler(ModelNotLoaded)
    async def on_model_not_loaded(_request: Request, _exc: ModelNotLoaded):
        return _error(503, "model_not_loaded", "no model is loaded")

    def require_model() -> Seq2SeqModel:
        if state["model"] is None:
            raise ModelNotLoaded()
        return state["model"]

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "schema_version": SCHEMA_VERSION}

    @app.get("/model/info")
    def model_info() -> dict:
        m = require_model()
        return {
            "schema_version": SCHEMA_VERSION,
            "config": {
                "embed_dim": m.config.embed_dim,
                "hidden_dim": m.config.hidden_dim,
                "num_layers": m.config.num_layers,
                "attention": m.config.attention,
                "teacher_forcing": m.config.teacher_forcing,
                "max_decode_len": m.config.max_decode_len,
                "seed": m.config.seed,
            },
            "proc_vocab_size": len(corpus.proc_vocab),
            "diag_vocab_size": len(corpus.diag_vocab),
            "proc_vocab_fingerprint": f"{corpus.proc_vocab.fingerprint():016x}",
            "diag_vocab_fingerprint": f"{corpus.diag_vocab.fingerprint():016x}",
            "initial_entropy_mode": state["mode"].value,
        }

    @app.get("/vocab/procedures")
    def vocab_procedures(q: str = "", limit: int = 20) -> dict:
        matches = [c for c in top_candidates(corpus, limit=len(corpus.proc_vocab))
                   if q in c]
        return {"schema_version": SCHEMA_VERSION, "codes": matches[:max(limit, 0)]}

    @app.post("/predict")
    def predict(req: PredictRequest) -> dict:
        m = require_model()
        entropies = prefix_entropies(m, req.procedures, corpus, state["mode"])
        if req.procedures:
            dist = first_distribution(
                m, [corpus.proc_vocab.index(c) for c in req.procedures])
            order = dist.argsort()[::-1][:req.top_k]
            top = [{"code": corpus.diag_vocab.code(int(i)), "probability": float(dist[i])}
                   for i in order]
        else:
            top = []
        return {
            "schema_version": SCHEMA_VERSION,
            "entropy_bits": entropies[-1],
            "step_entropies": entropies,
            "top_k": top,
            "warnings": _unknown_codes(req.procedures, corpus),
        }

    @app.post("/whatif")
    def whatif(req: WhatIfRequest) -> dict:
        m = require_model()
        current = prefix_entropies(m, req.prefix, corpus, state["mode"])[-1]
        raw = req.candidates if req.candidates is not None else top_candidates(corpus)
        candidates = sorted(set(raw))
        ranked = []
        for code in candidates:
            indices = [corpus.proc_vocab.index(c) for c in req.prefix + [code]]
            posterior = shannon_entropy(first_distribution(m, indices))
            ranked.append({"code": code, "posterior_entropy_bits": posterior,
                           "delta_bits": posterior - current})
        ranked.sort(key=lambda r: (r["posterior_entropy_bits"], r["code"]))
        return {
            "schema_version": SCHEMA_VERSION,
            "current_entropy_bits": current,
            "ranked": ranked,
            "warnings": _unknown_codes(req.prefix + list(raw), corpus),
        }

    if ui_dir is None:
        pkg_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
        ui_dir = os.path.join(pkg_root, "frontend", "dist")
    if os.path.isdir(ui_dir):
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
