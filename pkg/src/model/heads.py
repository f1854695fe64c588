"""Prediction heads, the weighted joint loss and answer/support decoding."""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from src.autodiff import ops
from src.autodiff.tensor import Tensor
from src.common.errors import LabelError, ShapeError
from src.corpus.text import detokenize
from src.graph.models import HierarchicalGraph, NodeLevel
from src.model.config import HeadConfig, LossWeights
from src.model.params import ModelParams, glorot

HEADS = ("para", "sent", "entity", "start", "end", "type")
ANSWER_TYPES = ("span", "yes", "no")
SPAN, YES, NO = range(3)


@dataclass
class MultiTaskOutput:
    para_logits: Tensor
    sent_logits: Tensor
    entity_logits: Tensor
    start_logits: Tensor
    end_logits: Tensor
    type_logits: Tensor


@dataclass
class Targets:
    para: np.ndarray
    sent: np.ndarray
    answer_type: int
    start: Optional[int] = None
    end: Optional[int] = None
    entity: Optional[int] = None  # position among entity nodes


@dataclass
class LossBreakdown:
    components: Dict[str, Tensor]
    total: Tensor
    weights: LossWeights = field(default_factory=LossWeights)

    def values(self) -> Dict[str, float]:
        values = {name: float(tensor.item()) for name, tensor in self.components.items()}
        values["total"] = float(self.total.item())
        return values


def span_input_width(d: int, config: HeadConfig) -> int:
    width = 3 * d if config.span_reads_sentence else 2 * d
    return width + d if config.evidence_summary else width


def type_input_width(d: int, config: HeadConfig) -> int:
    return 2 * d if config.evidence_summary else d


def init_head_params(params: ModelParams, d: int, config: HeadConfig, rng: np.random.Generator) -> None:
    if config.evidence_summary:
        params.add("heads.evidence.W1", glorot(rng, (d, d)))
        params.add("heads.evidence.b1", np.zeros(d))
    widths = {"para": d, "sent": d, "entity": d, "type": type_input_width(d, config),
              "start": span_input_width(d, config), "end": span_input_width(d, config)}
    for name in HEADS:
        out = len(ANSWER_TYPES) if name == "type" else 1
        params.add(f"heads.{name}.W1", glorot(rng, (widths[name], d)))
        params.add(f"heads.{name}.b1", np.zeros(d))
        params.add(f"heads.{name}.W2", glorot(rng, (d, out)))
        params.add(f"heads.{name}.b2", np.zeros(out))


def mlp(x: Tensor, params: ModelParams, name: str, slope: float = 0.2) -> Tensor:
    hidden = ops.leaky_relu(x @ params[f"heads.{name}.W1"] + params[f"heads.{name}.b1"], slope)
    return hidden @ params[f"heads.{name}.W2"] + params[f"heads.{name}.b2"]


def _node_logits(H: Tensor, graph: HierarchicalGraph, level: NodeLevel,
                 params: ModelParams, name: str) -> Tensor:
    rows = np.array(graph.level_range(level), dtype=np.int64)
    if len(rows) == 0:
        return Tensor(np.zeros(0))
    logits = mlp(ops.take(H, rows), params, name)
    return ops.reshape(logits, (len(rows),))


def evidence_summary(H: Tensor, graph: HierarchicalGraph, sent_logits: Tensor,
                     params: ModelParams, slope: float = 0.2) -> Tensor:
    """Per-sentence features averaged under softmax(sentence logits); one row of width d."""
    rows = np.array(graph.level_range(NodeLevel.SENTENCE), dtype=np.int64)
    hidden = ops.take(H, rows) @ params["heads.evidence.W1"] + params["heads.evidence.b1"]
    weights = ops.reshape(ops.softmax(sent_logits), (1, len(rows)))
    return weights @ ops.leaky_relu(hidden, slope)


def forward_heads(H: Tensor, tokens: Tensor, graph: HierarchicalGraph, params: ModelParams,
                  config: Optional[HeadConfig] = None) -> MultiTaskOutput:
    config = config or HeadConfig()
    if H.shape[0] != graph.g:
        raise ShapeError(f"node matrix has {H.shape[0]} rows, graph has {graph.g} nodes")
    n = len(graph.context_tokens)
    if tokens.shape[0] != n:
        raise ShapeError(f"token matrix has {tokens.shape[0]} rows, graph has {n} context tokens")

    sent_logits = _node_logits(H, graph, NodeLevel.SENTENCE, params, "sent")
    query = ops.take(H, np.array([0]))
    parts = [tokens, ops.take(H, np.zeros(n, dtype=np.int64))]
    if config.span_reads_sentence:
        parts.append(ops.take(H, graph.token_sentence))
    type_input = query
    if config.evidence_summary:
        if graph.n_s > 0:
            summary = evidence_summary(H, graph, sent_logits, params)
        else:
            summary = Tensor(np.zeros((1, H.shape[1]), dtype=H.data.dtype))
        parts.append(ops.take(summary, np.zeros(n, dtype=np.int64)))
        type_input = ops.concat([query, summary], axis=1)
    span_input = ops.concat(parts, axis=1)

    return MultiTaskOutput(
        para_logits=_node_logits(H, graph, NodeLevel.PARAGRAPH, params, "para"),
        sent_logits=sent_logits,
        entity_logits=_node_logits(H, graph, NodeLevel.ENTITY, params, "entity"),
        start_logits=ops.reshape(mlp(span_input, params, "start"), (n,)),
        end_logits=ops.reshape(mlp(span_input, params, "end"), (n,)),
        type_logits=ops.reshape(mlp(type_input, params, "type"), (len(ANSWER_TYPES),)),
    )


Loss = Union[float, Tensor]


def combine_losses(components: Mapping[str, Loss], weights: LossWeights) -> Loss:
    """start + end + l1*para + l2*sent + l3*entity + l4*type; works on floats or tensors."""
    terms = [
        (components["start"], 1.0),
        (components["end"], 1.0),
        (components["para"], weights.lambda1),
        (components["sent"], weights.lambda2),
        (components["entity"], weights.lambda3),
        (components["type"], weights.lambda4),
    ]
    total = terms[0][0]
    for value, weight in terms[1:]:
        total = total + value * weight
    return total


def _zero() -> Tensor:
    return Tensor(0.0)


def joint_loss(out: MultiTaskOutput, targets: Targets, weights: Optional[LossWeights] = None) -> LossBreakdown:
    weights = weights or LossWeights()
    n = out.start_logits.shape[0]
    components: Dict[str, Tensor] = {}

    if targets.answer_type == SPAN and targets.start is not None:
        end = targets.end if targets.end is not None else targets.start
        if not 0 <= targets.start <= end < n:
            raise LabelError(f"gold span ({targets.start}, {end}) outside context of {n} tokens")
        components["start"] = ops.cross_entropy_with_logits(out.start_logits, targets.start)
        components["end"] = ops.cross_entropy_with_logits(out.end_logits, end)
    else:
        components["start"] = _zero()
        components["end"] = _zero()

    components["para"] = ops.binary_cross_entropy_with_logits(out.para_logits, targets.para)
    components["sent"] = ops.binary_cross_entropy_with_logits(out.sent_logits, targets.sent)
    if targets.entity is not None and out.entity_logits.shape[0] > 0:
        if not 0 <= targets.entity < out.entity_logits.shape[0]:
            raise LabelError(f"gold entity {targets.entity} outside {out.entity_logits.shape[0]} entities")
        components["entity"] = ops.cross_entropy_with_logits(out.entity_logits, targets.entity)
    else:
        components["entity"] = _zero()
    if targets.answer_type not in (SPAN, YES, NO):
        raise LabelError(f"unknown answer type {targets.answer_type}")
    components["type"] = ops.cross_entropy_with_logits(out.type_logits, targets.answer_type)

    return LossBreakdown(components, combine_losses(components, weights), weights)


def best_span(start_logits: np.ndarray, end_logits: np.ndarray, max_span: int) -> Tuple[int, int]:
    """Highest start+end score over start <= end < start + max_span; first maximum wins."""
    n = len(start_logits)
    scores = start_logits[:, None] + end_logits[None, :]
    offsets = np.arange(n)[None, :] - np.arange(n)[:, None]
    scores = np.where((offsets >= 0) & (offsets < max_span), scores, -np.inf)
    flat = int(np.argmax(scores))
    return flat // n, flat % n


def decode_answer(out: MultiTaskOutput, graph: HierarchicalGraph, max_span: int = 30) -> str:
    answer_type = int(np.argmax(out.type_logits.data))
    if answer_type == YES:
        return "yes"
    if answer_type == NO:
        return "no"
    start, end = best_span(out.start_logits.data, out.end_logits.data, max_span)
    return detokenize(graph.context_tokens[start:end + 1])


def support_probabilities(out: MultiTaskOutput) -> np.ndarray:
    return ops.sigmoid(out.sent_logits).data


def decode_supports(out: MultiTaskOutput, graph: HierarchicalGraph,
                    threshold: float = 0.5) -> List[Tuple[str, int]]:
    """Sentences above threshold in node order, topped up to the best two when fewer qualify."""
    probs = support_probabilities(out)
    chosen = set(np.flatnonzero(probs > threshold).tolist())
    if len(chosen) < 2:
        chosen.update(np.argsort(-probs, kind="stable")[:2].tolist())
    sentences = graph.sentence_nodes()
    return [(sentences[i].title, sentences[i].sentence_index) for i in sorted(chosen)]
