import math

import numpy as np
import pytest

from src.autodiff.tensor import Tape, Tensor
from src.common.errors import LabelError, ShapeError
from src.graph.models import NodeLevel
from src.graph.sampling import random_graph
from src.model.config import HeadConfig, LossWeights
from src.model.heads import (
    NO,
    SPAN,
    YES,
    MultiTaskOutput,
    Targets,
    best_span,
    combine_losses,
    decode_answer,
    decode_supports,
    evidence_summary,
    forward_heads,
    init_head_params,
    joint_loss,
)
from src.model.params import ModelParams


def make_output(n=4, n_p=2, n_s=3, n_e=2, type_logits=(5.0, 0.0, 0.0), start=None, end=None, sent=None):
    return MultiTaskOutput(
        para_logits=Tensor(np.zeros(n_p)),
        sent_logits=Tensor(np.zeros(n_s) if sent is None else np.asarray(sent, dtype=float)),
        entity_logits=Tensor(np.zeros(n_e)),
        start_logits=Tensor(np.zeros(n) if start is None else np.asarray(start, dtype=float)),
        end_logits=Tensor(np.zeros(n) if end is None else np.asarray(end, dtype=float)),
        type_logits=Tensor(np.asarray(type_logits, dtype=float)),
    )


@pytest.fixture
def head_params(rng):
    params = ModelParams()
    init_head_params(params, 4, HeadConfig(), rng)
    return params


def test_output_shapes(head_params, rng):
    # Arrange
    graph = random_graph(rng, n_p=2, n_s=4, n_e=3)
    n = len(graph.context_tokens)

    # Act
    out = forward_heads(Tensor(rng.normal(size=(graph.g, 4))), Tensor(rng.normal(size=(n, 4))),
                        graph, head_params)

    # Assert
    assert out.para_logits.shape == (2,)
    assert out.sent_logits.shape == (4,)
    assert out.entity_logits.shape == (3,)
    assert out.start_logits.shape == out.end_logits.shape == (n,)
    assert out.type_logits.shape == (3,)

def test_no_entities_gives_empty_logits(head_params, rng):
    # Arrange
    graph = random_graph(rng, n_e=0)

    # Act
    out = forward_heads(Tensor(rng.normal(size=(graph.g, 4))),
                        Tensor(rng.normal(size=(len(graph.context_tokens), 4))), graph, head_params)

    # Assert
    assert out.entity_logits.shape == (0,)

def test_zero_weights_output_biases(head_params, rng):
    # Arrange
    graph = random_graph(rng)
    for name, tensor in head_params.items():
        tensor.data[...] = 0.0
    head_params["heads.type.b2"].data[...] = [0.5, -1.0, 2.0]

    # Act
    out = forward_heads(Tensor(rng.normal(size=(graph.g, 4))),
                        Tensor(rng.normal(size=(len(graph.context_tokens), 4))), graph, head_params)

    # Assert
    np.testing.assert_array_equal(out.type_logits.data, [0.5, -1.0, 2.0])
    assert (out.start_logits.data == 0.0).all()

def test_layout_mismatch_raises(head_params, rng):
    graph = random_graph(rng)
    with pytest.raises(ShapeError, match="node matrix"):
        forward_heads(Tensor(np.zeros((graph.g + 1, 4))),
                      Tensor(np.zeros((len(graph.context_tokens), 4))), graph, head_params)

def test_evidence_summary_follows_sentence_logits(head_params, rng):
    # Arrange
    graph = random_graph(rng, n_p=2, n_s=4, n_e=2)
    H = np.abs(rng.normal(size=(graph.g, 4)))
    head_params["heads.evidence.W1"].data[...] = np.eye(4)
    sentences = list(graph.level_range(NodeLevel.SENTENCE))

    # Act
    uniform = evidence_summary(Tensor(H), graph, Tensor(np.zeros(4)), head_params)
    peaked = evidence_summary(Tensor(H), graph, Tensor(np.array([0.0, 50.0, 0.0, 0.0])), head_params)

    # Assert
    assert uniform.shape == (1, 4)
    np.testing.assert_allclose(uniform.data[0], H[sentences].mean(axis=0))
    np.testing.assert_allclose(peaked.data[0], H[sentences[1]], atol=1e-12)

@pytest.mark.parametrize("summary", [True, False])
def test_type_head_reads_sentence_rows_through_summary(summary, rng):
    # Arrange
    config = HeadConfig(evidence_summary=summary)
    params = ModelParams()
    init_head_params(params, 4, config, rng)
    graph = random_graph(rng, n_p=2, n_s=4, n_e=2)
    H = rng.normal(size=(graph.g, 4))
    tokens = Tensor(rng.normal(size=(len(graph.context_tokens), 4)))
    moved = H.copy()
    moved[graph.level_range(NodeLevel.SENTENCE)[0]] += 3.0

    # Act
    before = forward_heads(Tensor(H), tokens, graph, params, config).type_logits.data
    after = forward_heads(Tensor(moved), tokens, graph, params, config).type_logits.data

    # Assert
    assert np.allclose(before, after) != summary

def test_summary_widens_type_and_span_inputs():
    # Arrange
    params = ModelParams()

    # Act
    init_head_params(params, 4, HeadConfig(), np.random.default_rng(0))

    # Assert
    assert params["heads.type.W1"].shape == (8, 4)
    assert params["heads.start.W1"].shape == (12, 4)
    assert params["heads.evidence.W1"].shape == (4, 4)


def test_combination_with_default_weights():
    # Act
    total = combine_losses(
        {"start": 1.0, "end": 2.0, "para": 0.5, "sent": 0.25, "entity": 0.0, "type": 0.0},
        LossWeights(),
    )

    # Assert
    assert total == pytest.approx(4.0)

def test_uniform_span_logits():
    # Arrange
    targets = Targets(para=np.array([1.0, 0.0]), sent=np.array([1.0, 0.0, 0.0]),
                      answer_type=SPAN, start=1, end=2)

    # Act
    losses = joint_loss(make_output(), targets).values()

    # Assert
    assert losses["start"] == pytest.approx(math.log(4.0))
    assert losses["end"] == pytest.approx(math.log(4.0))
    assert losses["para"] == pytest.approx(math.log(2.0))

def test_yes_no_masks_span_terms():
    # Arrange
    targets = Targets(para=np.zeros(2), sent=np.zeros(3), answer_type=YES)

    # Act
    losses = joint_loss(make_output(), targets).values()

    # Assert
    assert losses["start"] == losses["end"] == 0.0

def test_no_entities_masks_entity_term():
    # Arrange
    targets = Targets(para=np.zeros(2), sent=np.zeros(3), answer_type=NO, entity=0)

    # Act
    losses = joint_loss(make_output(n_e=0), targets).values()

    # Assert
    assert losses["entity"] == 0.0

def test_span_outside_context_raises():
    targets = Targets(para=np.zeros(2), sent=np.zeros(3), answer_type=SPAN, start=2, end=9)
    with pytest.raises(LabelError, match=r"gold span \(2, 9\) outside context of 4 tokens"):
        joint_loss(make_output(), targets)

def test_support_weight_scales_linearly():
    # Arrange
    targets = Targets(para=np.zeros(2), sent=np.array([1.0, 0.0, 1.0]), answer_type=NO)
    out = make_output(sent=[0.3, -1.0, 2.0])

    # Act
    light = joint_loss(out, targets, LossWeights(lambda2=1.0))
    heavy = joint_loss(out, targets, LossWeights(lambda2=3.0))

    # Assert
    difference = float(heavy.total.data) - float(light.total.data)
    assert difference == pytest.approx(2.0 * light.values()["sent"])

def test_loss_is_differentiable():
    # Arrange
    start = Tensor(np.zeros(4), requires_grad=True)
    out = make_output()
    out.start_logits = start
    targets = Targets(para=np.zeros(2), sent=np.zeros(3), answer_type=SPAN, start=0, end=0)

    # Act
    with Tape() as tape:
        total = joint_loss(out, targets).total
    (grad,) = tape.gradients(total, [start])

    # Assert
    np.testing.assert_allclose(grad, [-0.75, 0.25, 0.25, 0.25])


def test_best_span_with_hand_set_logits():
    # Arrange
    start = np.array([0.0, 1.0, 5.0, 0.0, 0.0])
    end = np.array([3.0, 0.0, 0.0, 4.0, 0.0])

    # Act / Assert
    assert best_span(start, end, max_span=30) == (2, 3)

def test_best_span_respects_max_span():
    # Arrange
    start = np.array([5.0, 0.0, 0.0, 0.0])
    end = np.array([0.0, 0.0, 0.0, 5.0])

    # Act
    bounded = best_span(start, end, max_span=2)

    # Assert
    assert best_span(start, end, max_span=30) == (0, 3)
    assert bounded[1] - bounded[0] < 2

def test_best_span_invariant_to_constant_shift(rng):
    start, end = rng.normal(size=6), rng.normal(size=6)
    assert best_span(start + 3.0, end - 1.0, 4) == best_span(start, end, 4)

def test_single_token_context():
    assert best_span(np.array([0.2]), np.array([-0.4]), 30) == (0, 0)

def test_decode_yes(rng):
    # Arrange
    graph = random_graph(rng)

    # Act
    answer = decode_answer(make_output(n=len(graph.context_tokens), type_logits=(0.0, 3.0, 1.0)), graph)

    # Assert
    assert answer == "yes"

def test_decode_span_detokenizes(rng):
    # Arrange
    graph = random_graph(rng)
    n = len(graph.context_tokens)
    start, end = np.zeros(n), np.zeros(n)
    start[1], end[2] = 5.0, 5.0

    # Act
    answer = decode_answer(make_output(n=n, start=start, end=end), graph)

    # Assert
    assert answer == " ".join(graph.context_tokens[1:3])

def test_supports_above_threshold_in_node_order(rng):
    # Arrange
    graph = random_graph(rng, n_p=2, n_s=4)
    out = make_output(n_s=4, sent=[3.0, -3.0, 2.0, 4.0])

    # Act
    supports = decode_supports(out, graph)

    # Assert
    sentences = graph.sentence_nodes()
    assert supports == [(sentences[i].title, sentences[i].sentence_index) for i in (0, 2, 3)]

def test_supports_fall_back_to_best_two(rng):
    # Arrange
    graph = random_graph(rng, n_p=2, n_s=4)
    out = make_output(n_s=4, sent=[-3.0, -1.0, -2.0, -4.0])

    # Act
    supports = decode_supports(out, graph)

    # Assert
    sentences = graph.sentence_nodes()
    assert supports == [(sentences[i].title, sentences[i].sentence_index) for i in (1, 2)]

def test_higher_threshold_never_adds_supports(rng):
    # Arrange
    graph = random_graph(rng, n_p=2, n_s=5)
    out = make_output(n_s=5, sent=rng.normal(size=5) * 3)

    # Act
    counts = [len(decode_supports(out, graph, t)) for t in (0.1, 0.3, 0.5, 0.7, 0.9)]

    # Assert
    assert counts == sorted(counts, reverse=True)
