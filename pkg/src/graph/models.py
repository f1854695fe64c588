from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, validator


class NodeLevel(str, Enum):
    QUERY = "q"
    PARAGRAPH = "p"
    SENTENCE = "s"
    ENTITY = "e"


class EdgeType(int, Enum):
    """Typed edges; the value is the column block of the per-type attention weights."""

    QP1 = 0        # (i) question - first-hop paragraph
    PP = 1         # (ii) paragraph - paragraph
    SS = 2         # (iii) sentence - sentence, same paragraph
    PS = 3         # (iv) paragraph - own sentence
    P2S_HYPER = 4  # (v) second-hop paragraph - hyperlinking sentence
    QE = 5         # (vi) question - matching entity
    SE = 6         # (vii) sentence - own entity
    QS = 7         # (viii) question - sentence
    SELF = 8


NUM_EDGE_TYPES = len(EdgeType)


class GraphConfig(BaseModel):
    max_paragraphs: int = 4
    qs_edges: bool = True
    sentence_edges: str = "adjacent"
    extract_entities: bool = True
    max_entities: int = 60

    @validator("max_paragraphs", "max_entities")
    def positive(cls, value: int, field) -> int:
        if value <= 0:
            raise ValueError(f"{field.name} must be positive, got {value}")
        return value

    @validator("sentence_edges")
    def known_sentence_policy(cls, value: str) -> str:
        if value not in ("adjacent", "all"):
            raise ValueError(f"sentence_edges must be 'adjacent' or 'all', got {value}")
        return value


@dataclass
class Node:
    index: int
    level: NodeLevel
    # token offsets [start, end) into question_tokens (query) or context_tokens
    span: Tuple[int, int]
    text: str
    parent: Optional[int] = None
    title: Optional[str] = None
    sentence_index: Optional[int] = None


@dataclass
class NeighborTable:
    """Padded neighbour lists for a set of target nodes.

    Row t lists the (neighbour, edge type) entries of targets[t]; padded
    entries point at node 0 with type 0 and are masked out.
    """

    targets: np.ndarray
    index: np.ndarray
    types: np.ndarray
    mask: np.ndarray


@dataclass
class HierarchicalGraph:
    nodes: List[Node]
    edges: List[Tuple[int, int, EdgeType]]
    n_p: int
    n_s: int
    n_e: int
    question_tokens: List[str]
    context_tokens: List[str]
    # context token position -> sentence node index
    token_sentence: np.ndarray
    # example paragraph index of each paragraph node, in node order
    paragraph_indices: List[int]
    _adjacency: Optional[List[List[Tuple[int, int]]]] = field(default=None, repr=False)

    @property
    def g(self) -> int:
        return 1 + self.n_p + self.n_s + self.n_e

    def level_range(self, level: NodeLevel) -> range:
        if level == NodeLevel.QUERY:
            return range(0, 1)
        if level == NodeLevel.PARAGRAPH:
            return range(1, 1 + self.n_p)
        if level == NodeLevel.SENTENCE:
            return range(1 + self.n_p, 1 + self.n_p + self.n_s)
        return range(1 + self.n_p + self.n_s, self.g)

    def level_nodes(self, levels: Sequence[NodeLevel]) -> np.ndarray:
        rows = sorted(i for level in set(levels) for i in self.level_range(level))
        return np.array(rows, dtype=np.int64)

    def adjacency(self) -> List[List[Tuple[int, int]]]:
        """Neighbour entries per node; a stored edge counts in both directions, a self-loop once."""
        if self._adjacency is None:
            adjacency: List[List[Tuple[int, int]]] = [[] for _ in range(self.g)]
            for src, dst, edge_type in self.edges:
                adjacency[dst].append((src, int(edge_type)))
                if src != dst:
                    adjacency[src].append((dst, int(edge_type)))
            self._adjacency = adjacency
        return self._adjacency

    def neighbor_table(self, targets: Sequence[int]) -> NeighborTable:
        targets = np.asarray(targets, dtype=np.int64)
        adjacency = self.adjacency()
        width = max([len(adjacency[t]) for t in targets] + [1])
        index = np.zeros((len(targets), width), dtype=np.int64)
        types = np.zeros((len(targets), width), dtype=np.int64)
        mask = np.zeros((len(targets), width), dtype=bool)
        for row, target in enumerate(targets):
            for col, (neighbor, edge_type) in enumerate(adjacency[target]):
                index[row, col] = neighbor
                types[row, col] = edge_type
                mask[row, col] = True
        return NeighborTable(targets=targets, index=index, types=types, mask=mask)

    def edge_counts(self) -> Dict[str, int]:
        counts = {edge_type.name: 0 for edge_type in EdgeType}
        for _, _, edge_type in self.edges:
            counts[EdgeType(edge_type).name] += 1
        return counts

    def sentence_nodes(self) -> List[Node]:
        return [self.nodes[i] for i in self.level_range(NodeLevel.SENTENCE)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "counts": {"n_p": self.n_p, "n_s": self.n_s, "n_e": self.n_e, "g": self.g},
            "nodes": [
                {
                    "index": node.index,
                    "level": node.level.value,
                    "span": list(node.span),
                    "text": node.text,
                    "parent": node.parent,
                    "title": node.title,
                    "sentence_index": node.sentence_index,
                }
                for node in self.nodes
            ],
            "edges": [
                {"src": src, "dst": dst, "type": EdgeType(edge_type).name}
                for src, dst, edge_type in self.edges
            ],
            "question_tokens": list(self.question_tokens),
            "context_tokens": list(self.context_tokens),
        }
