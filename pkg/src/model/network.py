from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.autodiff.tensor import Tensor
from src.graph.models import HierarchicalGraph
from src.model.config import ModelConfig
from src.model.encoder import encode, init_encoder_params
from src.model.gath import graph_reasoning, init_gath_params
from src.model.heads import (
    LossBreakdown,
    MultiTaskOutput,
    Targets,
    decode_answer,
    decode_supports,
    forward_heads,
    init_head_params,
    joint_loss,
)
from src.model.params import ModelParams


@dataclass
class ForwardResult:
    tokens: Tensor
    H: Tensor
    H_prime: Tensor
    output: MultiTaskOutput


class HierarchicalGraphNetwork:
    """Encoder, graph reasoning and prediction heads sharing one parameter registry."""

    def __init__(self, config: ModelConfig, seed: int = 0, params: Optional[ModelParams] = None):
        self.config = config
        if params is None:
            rng = np.random.default_rng(seed)
            params = ModelParams()
            init_encoder_params(params, config.encoder, rng)
            init_gath_params(params, config.gath, rng)
            init_head_params(params, config.encoder.d, config.heads, rng)
        self.params = params

    def forward(self, graph: HierarchicalGraph, question_ids: np.ndarray, context_ids: np.ndarray,
                training: bool = False, rng: Optional[np.random.Generator] = None,
                trace: Optional[List[np.ndarray]] = None) -> ForwardResult:
        tokens, H = encode(graph, question_ids, context_ids, self.params, self.config.encoder,
                           training, rng)
        H_prime = graph_reasoning(H, graph, self.params, self.config.gath, training, rng, trace)
        output = forward_heads(H_prime, tokens, graph, self.params, self.config.heads)
        return ForwardResult(tokens, H, H_prime, output)

    def loss(self, graph: HierarchicalGraph, question_ids: np.ndarray, context_ids: np.ndarray,
             targets: Targets, training: bool = False,
             rng: Optional[np.random.Generator] = None) -> LossBreakdown:
        result = self.forward(graph, question_ids, context_ids, training, rng)
        return joint_loss(result.output, targets, self.config.loss)

    def predict(self, graph: HierarchicalGraph, question_ids: np.ndarray,
                context_ids: np.ndarray) -> Tuple[str, List[Tuple[str, int]]]:
        output = self.forward(graph, question_ids, context_ids).output
        answer = decode_answer(output, graph, self.config.heads.max_span)
        supports = decode_supports(output, graph, self.config.heads.support_threshold)
        return answer, supports
