"""Multi-head graph attention over typed edges, simultaneous (GAT) or level by level (GATH).

Every head k projects all nodes with W^k (d x d/K) and scores the neighbour
entry (i, j, e) with LeakyReLU([h_i; h_j] . w_e^k). The per-type vectors are
stored as the columns of one (2d x 9K) matrix: column e*K + k, top half
applied to the target row h_i, bottom half to the neighbour row h_j.
"""
from typing import List, Optional, Sequence

import numpy as np

from src.autodiff import ops
from src.autodiff.tensor import Tensor
from src.common.errors import ConfigError
from src.graph.models import NUM_EDGE_TYPES, HierarchicalGraph, NeighborTable, NodeLevel
from src.model.config import GATHConfig, ReasoningMode
from src.model.params import ModelParams, glorot


def init_gath_params(params: ModelParams, config: GATHConfig, rng: np.random.Generator) -> None:
    d, K = config.d, config.K
    for param_set in range(config.num_param_sets()):
        for k in range(K):
            params.add(f"gath.{param_set}.W{k}", glorot(rng, (d, config.head_width)))
        params.add(f"gath.{param_set}.attention", glorot(rng, (2 * d, NUM_EDGE_TYPES * K)))


def head_weights(params: ModelParams, config: GATHConfig, param_set: int) -> List[Tensor]:
    return [params[f"gath.{param_set}.W{k}"] for k in range(config.K)]


def _coefficients(left: Tensor, right: Tensor, table: NeighborTable, head: int,
                  num_heads: int, slope: float) -> Tensor:
    columns = table.types * num_heads + head
    logits = (
        ops.take(left, (table.targets[:, None], columns))
        + ops.take(right, (table.index, columns))
    )
    return ops.masked_softmax(ops.leaky_relu(logits, slope), table.mask)


def _split_attention(H: Tensor, attention: Tensor):
    d = H.shape[1]
    if attention.shape[0] != 2 * d:
        raise ConfigError(f"attention weights have {attention.shape[0]} rows, expected 2*d={2 * d}")
    left = H @ ops.take(attention, np.arange(0, d))
    right = H @ ops.take(attention, np.arange(d, 2 * d))
    return left, right


def attention_coeffs(H: Tensor, graph: HierarchicalGraph, attention: Tensor, head: int,
                     num_heads: int, targets: Sequence[int], slope: float = 0.2) -> Tensor:
    """Attention rows alpha (len(targets) x width) over each target's padded neighbour list."""
    table = graph.neighbor_table(targets)
    left, right = _split_attention(H, attention)
    return _coefficients(left, right, table, head, num_heads, slope)


def update_level(H: Tensor, graph: HierarchicalGraph, params: ModelParams, config: GATHConfig,
                 levels: Sequence[NodeLevel], param_set: int = 0, training: bool = False,
                 rng: Optional[np.random.Generator] = None,
                 trace: Optional[List[np.ndarray]] = None) -> Tensor:
    """Replace the rows of `levels` by their attention update; every other row passes through."""
    rows = graph.level_nodes(levels)
    if len(rows) == 0:
        return H
    table = graph.neighbor_table(rows)
    left, right = _split_attention(H, params[f"gath.{param_set}.attention"])
    T, D = table.index.shape

    heads = []
    for k, weight in enumerate(head_weights(params, config, param_set)):
        alpha = _coefficients(left, right, table, k, config.K, config.slope)
        if trace is not None:
            trace.append(alpha.data.copy())
        alpha = ops.dropout(alpha, config.dropout, training, rng)
        projected = ops.take(H @ weight, table.index)
        aggregated = ops.sum(ops.reshape(alpha, (T, D, 1)) * projected, axis=1)
        heads.append(ops.leaky_relu(aggregated, config.slope))
    updated = heads[0] if len(heads) == 1 else ops.concat(heads, axis=1)
    return ops.replace_rows(H, updated, rows)


def gath_forward(H: Tensor, graph: HierarchicalGraph, params: ModelParams, config: GATHConfig,
                 training: bool = False, rng: Optional[np.random.Generator] = None,
                 return_stages: bool = False, trace: Optional[List[np.ndarray]] = None):
    """Fold `update_level` over the configured level order.

    Each stage reads the output of the previous one. With `return_stages`
    the intermediate matrices (one per stage, final last) are returned too.
    """
    stages = []
    for stage, levels in enumerate(config.level_order):
        param_set = stage if config.per_stage_params else 0
        H = update_level(H, graph, params, config, levels, param_set, training, rng, trace)
        stages.append(H)
    if return_stages:
        return H, stages
    return H


def gat_forward(H: Tensor, graph: HierarchicalGraph, params: ModelParams, config: GATHConfig,
                layers: int = 1, training: bool = False,
                rng: Optional[np.random.Generator] = None,
                trace: Optional[List[np.ndarray]] = None) -> Tensor:
    """Update every included level at once; layer i uses parameter set i."""
    if layers not in (1, 2):
        raise ConfigError(f"GAT supports 1 or 2 layers, got {layers}")
    for layer in range(layers):
        H = update_level(H, graph, params, config, config.included_levels, layer, training, rng, trace)
    return H


def graph_reasoning(H: Tensor, graph: HierarchicalGraph, params: ModelParams, config: GATHConfig,
                    training: bool = False, rng: Optional[np.random.Generator] = None,
                    trace: Optional[List[np.ndarray]] = None) -> Tensor:
    if config.mode == ReasoningMode.GAT_1LAYER:
        return gat_forward(H, graph, params, config, 1, training, rng, trace)
    if config.mode == ReasoningMode.GAT_2LAYER:
        return gat_forward(H, graph, params, config, 2, training, rng, trace)
    return gath_forward(H, graph, params, config, training, rng, trace=trace)
