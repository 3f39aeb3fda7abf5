import pytest

from medentropy.corpus import split, synth_generate
from medentropy.nncore import AdamHyper
from medentropy.seq2seq import ModelConfig, Seq2SeqModel, train

from worlds import deterministic_world


@pytest.fixture(scope="session")
def det_spec():
    return deterministic_world()


@pytest.fixture(scope="session")
def det_corpus(det_spec):
    corpus = synth_generate(det_spec, 60)
    return split(corpus, (0.8, 0.1, 0.1), seed=3)


def make_config(corpus, **overrides) -> ModelConfig:
    defaults = dict(embed_dim=12, hidden_dim=24, num_layers=1, attention=True,
                    teacher_forcing=True, proc_vocab_size=len(corpus.proc_vocab),
                    diag_vocab_size=len(corpus.diag_vocab), max_decode_len=6, seed=1)
    defaults.update(overrides)
    return ModelConfig(**defaults)


@pytest.fixture(scope="session")
def det_model(det_corpus):
    """Model trained to convergence on the deterministic world (loss ~0.02)."""
    model = Seq2SeqModel(make_config(det_corpus))
    model, _ = train(model, det_corpus, epochs=40, batch_size=8,
                     hyper=AdamHyper(learning_rate=5e-3))
    return model


@pytest.fixture
def untrained_model(det_corpus):
    return Seq2SeqModel(make_config(det_corpus, seed=9))
