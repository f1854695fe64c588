from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from src.common.errors import ConfigError, TrainingDivergedError
from src.corpus.models import SynthConfig
from src.corpus.synthetic import generate_synthetic
from src.corpus.vocab import Vocabulary
from src.evaluation.predictor import Predictor
from src.evaluation.scorer import score
from src.model.config import ModelConfig
from src.model.heads import NO, SPAN, YES
from src.model.network import HierarchicalGraphNetwork
from src.model.params import ModelParams
from src.training.features import answer_type, build_targets, locate_answer, prepare_example
from src.training.optimizer import Adam
from src.training.trainer import LOSS_CURVE_FILE, TrainConfig, Trainer, example_rng


@pytest.fixture
def quiet_model_config(tiny_model_config):
    raw = tiny_model_config.dict()
    raw["encoder"]["dropout_encoder"] = 0.0
    raw["gath"]["dropout"] = 0.0
    return tiny_model_config.parse_obj(raw)


def test_answer_type():
    assert answer_type("Yes") == YES
    assert answer_type("no.") == NO
    assert answer_type("the United States") == SPAN

def test_locate_answer_maps_back_to_raw_tokens():
    # Arrange
    tokens = ["in", "the", "United", "States", "."]

    # Act / Assert
    assert locate_answer(tokens, "the United States") == (2, 3)
    assert locate_answer(tokens, "Canada") is None

def test_skiffle_targets(skiffle_example):
    # Arrange
    prepared = prepare_example(skiffle_example, Vocabulary.build([skiffle_example], 100))

    # Act
    targets = build_targets(skiffle_example, prepared.graph)

    # Assert
    assert targets.para.tolist() == [1.0, 1.0]
    assert targets.sent.tolist() == [1.0, 0.0, 1.0]
    assert targets.answer_type == SPAN
    tokens = prepared.graph.context_tokens[targets.start:targets.end + 1]
    assert tokens == ["United", "States"]
    entity = prepared.graph.nodes[1 + 2 + 3 + targets.entity]
    assert entity.text == "United States"

def test_span_targets_prefer_supporting_sentences(small_synth_config, small_vocab):
    # Arrange
    examples = generate_synthetic(small_synth_config.copy(update={"bridge_fraction": 0.0, "num_examples": 40}))
    named = [ex for ex in examples if answer_type(ex.answer) == SPAN]

    for example in named:
        graph = prepare_example(example, small_vocab, training=True).graph

        # Act
        targets = build_targets(example, graph)

        # Assert
        holders = [node for flag, node in zip(targets.sent, graph.sentence_nodes())
                   if flag and node.span[0] <= targets.start and targets.end < node.span[1]]
        assert len(holders) == 1
    assert named

def test_training_selection_forces_gold(small_examples, small_vocab, tiny_model_config):
    # Arrange
    graph_config = tiny_model_config.graph.copy(update={"max_paragraphs": 2})

    # Act
    prepared = [prepare_example(ex, small_vocab, graph_config, training=True) for ex in small_examples]

    # Assert
    for item in prepared:
        assert item.targets.sent.sum() == 2.0


def test_zero_learning_rate_keeps_parameters(rng):
    # Arrange
    params = ModelParams()
    params.add("w", rng.normal(size=(3, 2)))
    before = params.state_dict()

    # Act
    Adam(params, lr=0.0).step([np.ones((3, 2))])

    # Assert
    np.testing.assert_array_equal(params["w"].data, before["w"])

def test_first_step_moves_by_learning_rate():
    # Arrange
    params = ModelParams()
    params.add("w", np.zeros(2))

    # Act
    Adam(params, lr=0.1).step([np.array([2.0, -3.0])])

    # Assert
    np.testing.assert_allclose(params["w"].data, [-0.1, 0.1], rtol=1e-6)

def test_gradient_count_must_match():
    params = ModelParams()
    params.add("w", np.zeros(2))
    with pytest.raises(ValueError, match="Expected 1 gradients"):
        Adam(params).step([])


def test_empty_dataset(tiny_model_config):
    with pytest.raises(ConfigError, match="non-empty"):
        Trainer(tiny_model_config).fit([])

def test_config_validation():
    with pytest.raises(ValidationError, match="batch_size must be positive"):
        TrainConfig(batch_size=0)

def test_example_rng_is_reproducible():
    assert example_rng(7, 3, 1).random() == example_rng(7, 3, 1).random()
    assert example_rng(7, 3, 1).random() != example_rng(7, 3, 2).random()

def test_same_seed_same_run(small_examples, tiny_model_config):
    # Arrange
    config = TrainConfig(batch_size=4, epochs=1, max_steps=3)

    # Act
    first = Trainer(tiny_model_config, config).fit(small_examples[:8])
    second = Trainer(tiny_model_config, config).fit(small_examples[:8])

    # Assert
    pd.testing.assert_frame_equal(first.curve, second.curve)
    for name, tensor in first.network.params.items():
        np.testing.assert_array_equal(tensor.data, second.network.params[name].data)

def test_thread_pool_matches_serial(small_examples, tiny_model_config):
    # Arrange
    serial = TrainConfig(batch_size=4, epochs=1, max_steps=2, jobs=1)
    parallel = serial.copy(update={"jobs": 3})

    # Act
    first = Trainer(tiny_model_config, serial).fit(small_examples[:8])
    second = Trainer(tiny_model_config, parallel).fit(small_examples[:8])

    # Assert
    pd.testing.assert_frame_equal(first.curve, second.curve)

def test_zero_learning_rate_keeps_initialisation(small_examples, tiny_model_config):
    # Arrange
    config = TrainConfig(batch_size=2, epochs=1, learning_rate=0.0)

    # Act
    result = Trainer(tiny_model_config, config).fit(small_examples[:4])

    # Assert
    fresh = HierarchicalGraphNetwork(tiny_model_config, seed=config.seed)
    for name, tensor in result.network.params.items():
        np.testing.assert_array_equal(tensor.data, fresh.params[name].data)

def test_divergence_stops_training(small_examples, tiny_model_config):
    # Arrange
    trainer = Trainer(tiny_model_config, TrainConfig(batch_size=2, epochs=1))

    # Act
    with patch.object(Trainer, "batch_gradients", return_value=(float("nan"), [])):
        with pytest.raises(TrainingDivergedError) as excinfo:
            trainer.fit(small_examples[:4])

    # Assert
    assert excinfo.value.step == 1

def test_writes_curve_and_checkpoint(small_examples, tiny_model_config, tmp_path):
    # Arrange
    config = TrainConfig(batch_size=4, epochs=2)

    # Act
    result = Trainer(tiny_model_config, config).fit(small_examples[:8], output_dir=tmp_path)

    # Assert
    curve = pd.read_csv(tmp_path / LOSS_CURVE_FILE)
    assert list(curve.columns) == ["step", "train_loss", "dev_loss"]
    assert len(curve) == result.steps == 4
    assert curve["dev_loss"].notna().sum() == 2
    assert (tmp_path / "params.npz").exists()

def test_single_example_is_memorised(small_examples, quiet_model_config):
    # Arrange
    example = [ex for ex in small_examples if ex.answer not in ("yes", "no")][0]
    trainer = Trainer(quiet_model_config, TrainConfig(batch_size=1, epochs=200, learning_rate=1e-2))
    vocab = Vocabulary.build([example], quiet_model_config.encoder.vocab_size)
    initial = trainer.evaluate_loss(
        HierarchicalGraphNetwork(quiet_model_config, seed=7),
        [prepare_example(example, vocab, quiet_model_config.graph)],
    )

    # Act
    result = trainer.fit([example], vocab=vocab)

    # Assert
    assert result.best_dev_loss < 0.1 * initial

@pytest.fixture
def desk_corpus():
    examples = generate_synthetic(SynthConfig(num_examples=600, seed=7))
    return examples[:500], examples[500:]

@pytest.fixture
def desk_model_config():
    return ModelConfig.parse_obj({
        "encoder": {"vocab_size": 5000, "d": 32},
        "gath": {"K": 4, "d": 32, "mode": "gath", "level_order": "s,e,p"},
    })

@pytest.mark.slow
def test_desk_scale_training_answers_held_out_questions(desk_corpus, desk_model_config):
    # Arrange
    train_examples, held_out = desk_corpus
    config = TrainConfig(epochs=20, batch_size=16, learning_rate=1e-3, seed=7)

    # Act
    result = Trainer(desk_model_config, config).fit(train_examples)
    report = score(Predictor(result.network, result.vocab).predict(held_out), held_out)

    # Assert
    assert report.answer.em >= 0.90
    assert report.support.f1 >= 0.85

@pytest.mark.slow
def test_desk_scale_training_is_reproducible(desk_corpus, desk_model_config):
    # Arrange
    train_examples, held_out = desk_corpus
    config = TrainConfig(epochs=3, batch_size=16, learning_rate=1e-3, seed=7)

    # Act
    first = Trainer(desk_model_config, config).fit(train_examples)
    second = Trainer(desk_model_config, config).fit(train_examples)

    # Assert
    pd.testing.assert_frame_equal(first.curve, second.curve)
    first_report = score(Predictor(first.network, first.vocab).predict(held_out), held_out)
    second_report = score(Predictor(second.network, second.vocab).predict(held_out), held_out)
    assert first_report == second_report
