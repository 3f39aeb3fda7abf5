"""Procedure-to-diagnosis predictor: stacked GRU encoder/decoder with optional
dot-product attention, teacher forcing, training loop, greedy decoding, and a
versioned binary checkpoint format.

Sequences are index lists against the corpus vocabularies. The encoder folds a
procedure sequence into per-position hidden states plus a context vector; the
decoder starts from that context and emits a diagnosis distribution per step.
The first decoder step's softmax is the distribution that downstream entropy
analysis consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from . import nncore as nn
from .corpus import Corpus, Vocab, SOS, EOS
from .nncore import Matrix, Parameter, Tape, AdamHyper

CHECKPOINT_VERSION = 1
INIT_SCALE = 0.08  # uniform(-0.08, 0.08) parameter init


class CheckpointError(ValueError):
    """Raised on malformed, truncated, or mismatched checkpoint files."""


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int
    hidden_dim: int
    num_layers: int
    attention: bool
    teacher_forcing: bool
    proc_vocab_size: int
    diag_vocab_size: int
    max_decode_len: int = 16
    seed: int = 42

    def __post_init__(self) -> None:
        if self.num_layers not in (1, 2, 3):
            raise ValueError(f"num_layers must be 1, 2, or 3, got {self.num_layers}")
        for fld in ("embed_dim", "hidden_dim", "proc_vocab_size", "diag_vocab_size",
                    "max_decode_len"):
            if getattr(self, fld) < 1:
                raise ValueError(f"{fld} must be >= 1")

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


@dataclass
class EncodeResult:
    """Top-layer hidden state per input position plus final hiddens of every layer."""

    top_states: list[Matrix]      # one 1xH matrix per input position
    layer_finals: list[Matrix]    # final hidden per layer; [-1] is the context vector
    stacked: Matrix               # top_states stacked to LxH (attention keys/values)

    @property
    def context(self) -> Matrix:
        return self.layer_finals[-1]


class Seq2SeqModel:
    """Parameter bundle for the predictor. Treat as frozen once trained or loaded."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.params: dict[str, Parameter] = {}
        rng = np.random.default_rng(config.seed)

        def make(name: str, rows: int, cols: int) -> None:
            self.params[name] = Parameter(
                name, rng.uniform(-INIT_SCALE, INIT_SCALE, size=(rows, cols)))

        e, h = config.embed_dim, config.hidden_dim
        make("proc_embedding", config.proc_vocab_size, e)
        make("diag_embedding", config.diag_vocab_size, e)
        for side in ("enc", "dec"):
            for layer in range(config.num_layers):
                x_dim = e if layer == 0 else h
                for gate in ("r", "z", "n"):
                    make(f"{side}.l{layer}.W{gate}", x_dim, h)
                    make(f"{side}.l{layer}.U{gate}", h, h)
                    make(f"{side}.l{layer}.b{gate}", 1, h)
        if config.attention:
            make("attn.Wc", 2 * h, h)
            make("attn.bc", 1, h)
        make("out.W", h, config.diag_vocab_size)
        make("out.b", 1, config.diag_vocab_size)

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def __getitem__(self, name: str) -> Matrix:
        return self.params[name].mat


def _gru_cell(model: Seq2SeqModel, side: str, layer: int, x: Matrix, h: Matrix) -> Matrix:
    """r = sig(xWr + hUr + br); z = sig(xWz + hUz + bz);
    n = tanh(xWn + r*(hUn) + bn); h' = (1-z)*n + z*h."""
    p = lambda gate, kind: model[f"{side}.l{layer}.{kind}{gate}"]
    r = nn.sigmoid(nn.add(nn.add(nn.matmul(x, p("r", "W")), nn.matmul(h, p("r", "U"))),
                          p("r", "b")))
    z = nn.sigmoid(nn.add(nn.add(nn.matmul(x, p("z", "W")), nn.matmul(h, p("z", "U"))),
                          p("z", "b")))
    n_pre = nn.add(nn.add(nn.matmul(x, p("n", "W")), nn.mul(r, nn.matmul(h, p("n", "U")))),
                   p("n", "b"))
    n = nn.tanh(n_pre)
    # h' = n + z*(h - n)
    return nn.add(n, nn.mul(z, nn.sub(h, n)))


def encode(model: Seq2SeqModel, proc_indices: list[int]) -> EncodeResult:
    """Run the stacked encoder from zero initial state over a procedure index list."""
    cfg = model.config
    if not proc_indices:
        raise ValueError("encode requires a non-empty procedure index list")
    for idx in proc_indices:
        if not 0 <= idx < cfg.proc_vocab_size:
            raise ValueError(f"procedure index {idx} out of range")
    hiddens = [nn.zeros(1, cfg.hidden_dim) for _ in range(cfg.num_layers)]
    top_states: list[Matrix] = []
    for idx in proc_indices:
        x = nn.row_lookup(model["proc_embedding"], idx)
        for layer in range(cfg.num_layers):
            hiddens[layer] = _gru_cell(model, "enc", layer, x, hiddens[layer])
            x = hiddens[layer]
        top_states.append(hiddens[-1])
    return EncodeResult(top_states, hiddens, nn.stack_rows(top_states))


def attend(model: Seq2SeqModel, decoder_hidden: Matrix,
           enc: EncodeResult) -> tuple[Matrix, np.ndarray]:
    """Dot-product attention over encoder top states.

    Returns the tanh-combined context (fed to the output projection) and the
    attention weights over input positions.
    """
    if not model.config.attention:
        raise ValueError("attention is disabled in this model's config")
    scores = nn.matmul(decoder_hidden, nn.transpose(enc.stacked))
    weights = nn.softmax_row(scores)
    context = nn.matmul(weights, enc.stacked)
    combined = nn.tanh(nn.add(nn.matmul(nn.concat_cols(decoder_hidden, context),
                                        model["attn.Wc"]),
                              model["attn.bc"]))
    return combined, weights.value[0].copy()


def _decode_step(model: Seq2SeqModel, token: int, hiddens: list[Matrix],
                 enc: EncodeResult) -> tuple[Matrix, list[Matrix]]:
    """One decoder step; returns the softmax distribution and updated hiddens."""
    cfg = model.config
    x = nn.row_lookup(model["diag_embedding"], token)
    new_hiddens = []
    for layer in range(cfg.num_layers):
        h = _gru_cell(model, "dec", layer, x, hiddens[layer])
        new_hiddens.append(h)
        x = h
    feat = new_hiddens[-1]
    if cfg.attention:
        feat, _ = attend(model, feat, enc)
    logits = nn.add(nn.matmul(feat, model["out.W"]), model["out.b"])
    return nn.softmax_row(logits), new_hiddens


def decode_first_distribution(model: Seq2SeqModel, enc: EncodeResult) -> np.ndarray:
    """Softmax distribution of the first decoded diagnosis, given encoded procedures.

    This is the distribution whose Shannon entropy quantifies diagnostic
    uncertainty for the encoded prefix.
    """
    dist, _ = _decode_step(model, SOS, list(enc.layer_finals), enc)
    return dist.value[0].copy()


def first_distribution(model: Seq2SeqModel, proc_indices: list[int]) -> np.ndarray:
    """encode + decode_first_distribution in one call (pure, no tape)."""
    return decode_first_distribution(model, encode(model, proc_indices))


def greedy_decode(model: Seq2SeqModel, proc_indices: list[int]) -> list[int]:
    """Argmax decoding until EOS or max_decode_len; EOS is excluded from the output.

    Argmax ties break to the lowest index.
    """
    enc = encode(model, proc_indices)
    hiddens = list(enc.layer_finals)
    token = SOS
    out: list[int] = []
    for _ in range(model.config.max_decode_len):
        dist, hiddens = _decode_step(model, token, hiddens, enc)
        token = int(np.argmax(dist.value[0]))
        if token == EOS:
            break
        out.append(token)
    return out


def sequence_loss(model: Seq2SeqModel, proc_indices: list[int],
                  diag_indices: list[int]) -> Matrix:
    """Mean token cross-entropy over the diagnosis sequence plus EOS.

    With teacher forcing the decoder consumes ground-truth previous tokens;
    without it, its own argmax predictions.
    """
    cfg = model.config
    enc = encode(model, proc_indices)
    hiddens = list(enc.layer_finals)
    targets = list(diag_indices) + [EOS]
    token = SOS
    losses = []
    for target in targets:
        dist, hiddens = _decode_step(model, token, hiddens, enc)
        losses.append(nn.cross_entropy(dist, target))
        if cfg.teacher_forcing:
            token = target
        else:
            token = int(np.argmax(dist.value[0]))
    return nn.affine(nn.sum_mats(losses), 1.0 / len(losses), 0.0)


def train(model: Seq2SeqModel, corpus: Corpus, epochs: int, batch_size: int,
          hyper: AdamHyper) -> tuple[Seq2SeqModel, list[float]]:
    """Train on the corpus's train split; returns the model and per-epoch mean loss.

    Batches are gradient-accumulated per admission (each loss scaled by the
    batch size), so no padding is involved. Deterministic for a fixed seed.
    """
    admissions = corpus.split_admissions("train")
    if not admissions:
        raise ValueError("corpus has an empty train split")
    if epochs < 1 or batch_size < 1:
        raise ValueError("epochs and batch_size must be >= 1")
    examples = [
        ([corpus.proc_vocab.index(c) for c in adm.procedures],
         [corpus.diag_vocab.index(c) for c in adm.diagnoses])
        for adm in admissions
    ]
    rng = np.random.default_rng([model.config.seed, 0x5EED])
    params = model.parameters()
    history: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(len(examples))
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            inv = 1.0 / len(batch)
            for k in batch:
                procs, diags = examples[int(k)]
                with Tape() as tape:
                    loss = sequence_loss(model, procs, diags)
                    scaled = nn.affine(loss, inv, 0.0)
                nn.backward(tape, scaled)
                epoch_losses.append(float(loss.value[0, 0]))
            nn.adam_step(params, hyper)
        history.append(float(np.mean(epoch_losses)))
    return model, history


# --- checkpoint persistence ---------------------------------------------------

def save_checkpoint(model: Seq2SeqModel, path: str,
                    proc_vocab: Vocab, diag_vocab: Vocab) -> None:
    """Write a versioned checkpoint: one JSON header line, then little-endian
    float64 parameter blocks in declared order."""
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "proc_fingerprint": f"{proc_vocab.fingerprint():016x}",
        "diag_fingerprint": f"{diag_vocab.fingerprint():016x}",
        "params": [
            {"name": p.name, "rows": p.mat.rows, "cols": p.mat.cols}
            for p in model.parameters()
        ],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for p in model.parameters():
            fh.write(np.ascontiguousarray(p.mat.value, dtype="<f8").tobytes())


def load_checkpoint(path: str, proc_vocab: Vocab | None = None,
                    diag_vocab: Vocab | None = None) -> Seq2SeqModel:
    """Load a checkpoint; verifies format version, shapes, and (when vocabularies
    are supplied) the vocabulary fingerprints recorded at save time."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable checkpoint header") from exc
        version = header.get("format_version")
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"format_version mismatch: file has {version!r}, expected {CHECKPOINT_VERSION}")
        if proc_vocab is not None:
            want = f"{proc_vocab.fingerprint():016x}"
            if header.get("proc_fingerprint") != want:
                raise CheckpointError("proc_fingerprint mismatch: checkpoint was saved "
                                      "against a different procedure vocabulary")
        if diag_vocab is not None:
            want = f"{diag_vocab.fingerprint():016x}"
            if header.get("diag_fingerprint") != want:
                raise CheckpointError("diag_fingerprint mismatch: checkpoint was saved "
                                      "against a different diagnosis vocabulary")
        model = Seq2SeqModel(ModelConfig.from_dict(header["config"]))
        declared = [(p.name, p.mat.rows, p.mat.cols) for p in model.parameters()]
        recorded = [(e["name"], e["rows"], e["cols"]) for e in header.get("params", [])]
        if declared != recorded:
            raise CheckpointError("params manifest mismatch: checkpoint layout does not "
                                  "match its declared config")
        for p in model.parameters():
            nbytes = p.mat.rows * p.mat.cols * 8
            blob = fh.read(nbytes)
            if len(blob) != nbytes:
                raise CheckpointError(f"truncated checkpoint: parameter {p.name!r} incomplete")
            p.mat.value[...] = np.frombuffer(blob, dtype="<f8").reshape(p.mat.shape)
        if fh.read(1):
            raise CheckpointError("trailing bytes after final parameter block")
    return model
