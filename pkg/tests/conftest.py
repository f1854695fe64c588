import copy

import numpy as np
import pytest

from src.autodiff.tensor import set_default_dtype
from src.corpus.hotpot import parse_record
from src.corpus.models import SynthConfig
from src.corpus.synthetic import generate_synthetic
from src.corpus.vocab import Vocabulary
from src.model.config import ModelConfig

SKIFFLE_RECORD = {
    "_id": "skiffle",
    "question": "Where did the form of music played by Die Rhöner Säuwäntzt originate ?",
    "answer": "the United States",
    "type": "bridge",
    "supporting_facts": [["Die Rhöner Säuwäntzt", 0], ["Skiffle", 1]],
    "context": [
        ["Die Rhöner Säuwäntzt", [
            "Die Rhöner Säuwäntzt are a Skiffle - Bluesband from Eichenzell - Lütter in Hessen , Germany .",
        ]],
        ["Skiffle", [
            "Skiffle is a music genre with jazz , blues , folk and American folk influences .",
            "Originating as a term in the United States in the first half of the 20th century , "
            "it became popular again in the UK in the 1950s .",
        ]],
    ],
}


@pytest.fixture(autouse=True)
def float64_precision():
    set_default_dtype(np.float64)
    yield
    set_default_dtype(np.float64)


@pytest.fixture
def skiffle_record():
    return copy.deepcopy(SKIFFLE_RECORD)


@pytest.fixture
def skiffle_example(skiffle_record):
    return parse_record(skiffle_record)


@pytest.fixture
def small_synth_config():
    return SynthConfig(num_examples=24, vocab_size=400, num_entities=30, distractor_count=4, seed=7)


@pytest.fixture
def small_examples(small_synth_config):
    return generate_synthetic(small_synth_config)


@pytest.fixture
def small_vocab(small_examples):
    return Vocabulary.build(small_examples, 400)


@pytest.fixture
def tiny_model_config():
    return ModelConfig.parse_obj({
        "encoder": {"vocab_size": 400, "d": 8, "max_positions": 256},
        "gath": {"K": 2, "d": 8},
    })


@pytest.fixture
def rng():
    return np.random.default_rng(0)
