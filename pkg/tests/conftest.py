import random

import numpy as np
import pytest

from editrepair import autodiff as ad
from editrepair.minilang.randprog import ProgramGenerator
from editrepair.model.params import ModelParams, desk_preset, token_vocab_for
from editrepair.oracle import extract_many, grammar_for_corpus, mutate_corpus
from editrepair.training import TrainConfig, Trainer


@pytest.fixture(autouse=True)
def float32_default():
    # individual tests switch to float64 for finite-difference work
    ad.set_dtype(np.float32)
    yield
    ad.set_dtype(np.float32)


@pytest.fixture(scope="session")
def seed_programs():
    gen = ProgramGenerator(random.Random(42))
    return [gen.program() for _ in range(60)]


@pytest.fixture(scope="session")
def small_pairs(seed_programs):
    return mutate_corpus(seed_programs, 160, seed=1)


@pytest.fixture(scope="session")
def edit_grammar(small_pairs):
    return grammar_for_corpus(small_pairs, threshold=8)


@pytest.fixture(scope="session")
def small_examples(small_pairs, edit_grammar):
    examples, rejects = extract_many(small_pairs, edit_grammar)
    assert len(examples) >= 0.95 * len(small_pairs), rejects
    return examples


@pytest.fixture(scope="session")
def untrained_params(edit_grammar, small_pairs):
    vocab = token_vocab_for(edit_grammar, [p.buggy for p in small_pairs])
    return ModelParams(desk_preset(), edit_grammar, vocab, seed=0)


@pytest.fixture(scope="session")
def trained_params(edit_grammar, small_pairs, small_examples):
    """A small model overfit on a slice of the corpus; enough signal for the
    decode/repair tests without acceptance-scale training."""
    ad.set_dtype(np.float32)
    vocab = token_vocab_for(edit_grammar, [p.buggy for p in small_pairs])
    params = ModelParams(desk_preset(), edit_grammar, vocab, seed=0)
    config = TrainConfig(lr=1e-3, batch_size=16, seed=0)
    trainer = Trainer(params, config)
    trainer.run_steps(small_examples[:48], 220)
    return params
