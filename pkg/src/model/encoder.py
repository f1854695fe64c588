"""Context encoding: token embeddings with per-segment positions, bi-attention, node pooling."""
from typing import NamedTuple, Optional, Tuple

import numpy as np

from src.autodiff import ops
from src.autodiff.tensor import Tensor, default_dtype
from src.common.errors import ShapeError
from src.graph.models import HierarchicalGraph
from src.model.config import EncoderConfig
from src.model.params import ModelParams, glorot, normal


class AttentionFlow(NamedTuple):
    similarity: Tensor
    context_to_query: Tensor  # row-wise attention over question tokens
    attended_question: Tensor  # c-hat, one row per context token
    attended_context: Tensor  # q-hat, a single row


def init_encoder_params(params: ModelParams, config: EncoderConfig, rng: np.random.Generator) -> None:
    d = config.d
    params.add("encoder.embedding", normal(rng, (config.vocab_size, d), 1.0 / np.sqrt(d)))
    params.add("encoder.position", normal(rng, (config.max_positions, d), 0.1 / np.sqrt(d)))
    if config.use_bi_attention:
        params.add("encoder.bi_attention.similarity", normal(rng, (3 * d, 1), 1.0 / np.sqrt(d)))
        # starts close to the identity on the context channel
        projection = 0.1 * glorot(rng, (4 * d, d))
        projection[:d] += np.eye(d)
        params.add("encoder.bi_attention.projection", projection)


def encode_tokens(question_ids: np.ndarray, context_ids: np.ndarray, params: ModelParams,
                  config: EncoderConfig, training: bool = False,
                  rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, Tensor]:
    """Embed question and context tokens; positions restart at 0 for each segment."""
    if len(context_ids) == 0:
        raise ShapeError("empty context")
    if len(question_ids) == 0:
        raise ShapeError("empty question")
    embedding = params["encoder.embedding"]
    position = params["encoder.position"]

    def embed(ids: np.ndarray) -> Tensor:
        ids = np.asarray(ids, dtype=np.int64)
        ids = np.where((ids >= 0) & (ids < config.vocab_size), ids, 0)
        positions = np.minimum(np.arange(len(ids)), config.max_positions - 1)
        rows = ops.take(embedding, ids) + ops.take(position, positions)
        return ops.dropout(rows, config.dropout_encoder, training, rng)

    return embed(question_ids), embed(context_ids)


def attention_flow(context: Tensor, question: Tensor, similarity: Tensor) -> AttentionFlow:
    if context.shape[0] == 0 or question.shape[0] == 0:
        raise ShapeError(f"bi-attention needs non-empty inputs, got {context.shape} and {question.shape}")
    d = context.shape[1]
    w_context = ops.take(similarity, np.arange(0, d))
    w_question = ops.take(similarity, np.arange(d, 2 * d))
    w_product = ops.take(similarity, np.arange(2 * d, 3 * d))

    # s_ij = w . [c_i; q_j; c_i * q_j]
    scores = (
        context @ w_context
        + ops.transpose(question @ w_question)
        + (context * ops.transpose(w_product)) @ ops.transpose(question)
    )
    weights = ops.softmax(scores, axis=1)
    attended_question = weights @ question
    peak = ops.reshape(ops.max(scores, axis=1), (1, context.shape[0]))
    attended_context = ops.softmax(peak, axis=1) @ context
    return AttentionFlow(scores, weights, attended_question, attended_context)


def bi_attention(context: Tensor, question: Tensor, similarity: Tensor, projection: Tensor) -> Tensor:
    flow = attention_flow(context, question, similarity)
    fused = ops.concat(
        [
            context,
            flow.attended_question,
            context * flow.attended_question,
            context * flow.attended_context,
        ],
        axis=1,
    )
    return fused @ projection


def pooling_matrix(graph: HierarchicalGraph, num_tokens: int) -> np.ndarray:
    """Row i-1 averages the context tokens of node i; the query node is pooled separately."""
    pool = np.zeros((graph.g - 1, num_tokens), dtype=default_dtype())
    for node in graph.nodes[1:]:
        start, end = node.span
        if end <= start:
            raise ShapeError(f"node {node.index} has an empty span")
        if start < 0 or end > num_tokens:
            raise ShapeError(f"node {node.index} span {node.span} outside {num_tokens} context tokens")
        pool[node.index - 1, start:end] = 1.0 / (end - start)
    return pool


def pool_nodes(context: Tensor, question: Tensor, graph: HierarchicalGraph) -> Tensor:
    """Node embeddings H (g x d) in canonical order: query, paragraphs, sentences, entities."""
    if context.shape[0] != len(graph.context_tokens):
        raise ShapeError(
            f"context has {context.shape[0]} rows but the graph lays out "
            f"{len(graph.context_tokens)} tokens"
        )
    query = ops.mean(question, axis=0, keepdims=True)
    if graph.g == 1:
        return query
    pool = Tensor(pooling_matrix(graph, context.shape[0]))
    return ops.concat([query, pool @ context], axis=0)


def encode(graph: HierarchicalGraph, question_ids: np.ndarray, context_ids: np.ndarray,
           params: ModelParams, config: EncoderConfig, training: bool = False,
           rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, Tensor]:
    """Return (fused context token rows, node embeddings H)."""
    question, context = encode_tokens(question_ids, context_ids, params, config, training, rng)
    if config.use_bi_attention:
        context = bi_attention(
            context, question,
            params["encoder.bi_attention.similarity"],
            params["encoder.bi_attention.projection"],
        )
    return context, pool_nodes(context, question, graph)
