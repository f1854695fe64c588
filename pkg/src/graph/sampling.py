"""Random hierarchical graphs with a valid layout, for property checks and gradient checks."""
from typing import List, Tuple

import numpy as np

from src.graph.models import EdgeType, HierarchicalGraph, Node, NodeLevel


def random_graph(rng: np.random.Generator, n_p: int = 2, n_s: int = 5, n_e: int = 4,
                 qs_edges: bool = True, tokens_per_sentence: Tuple[int, int] = (2, 5),
                 question_length: int = 4) -> HierarchicalGraph:
    """Sample a graph honouring the hierarchy: sentences belong to paragraphs, entities to sentences."""
    if n_p < 1 or n_s < n_p:
        raise ValueError(f"need 1 <= n_p <= n_s, got n_p={n_p}, n_s={n_s}")
    nodes: List[Node] = [Node(0, NodeLevel.QUERY, (0, question_length), "question")]
    for p in range(n_p):
        nodes.append(Node(1 + p, NodeLevel.PARAGRAPH, (0, 0), f"title {p}", title=f"title {p}"))

    # every paragraph gets at least one sentence, the rest are spread at random
    owners = sorted(list(range(n_p)) + rng.integers(0, n_p, size=n_s - n_p).tolist())
    context_tokens: List[str] = []
    token_sentence: List[int] = []
    per_paragraph = [0] * n_p
    for s, owner in enumerate(owners):
        index = 1 + n_p + s
        length = int(rng.integers(tokens_per_sentence[0], tokens_per_sentence[1] + 1))
        start = len(context_tokens)
        context_tokens.extend(f"w{index}_{i}" for i in range(length))
        token_sentence.extend([index] * length)
        nodes.append(Node(index, NodeLevel.SENTENCE, (start, len(context_tokens)), f"sentence {s}",
                          parent=1 + owner, title=f"title {owner}",
                          sentence_index=per_paragraph[owner]))
        per_paragraph[owner] += 1
    for p in range(n_p):
        spans = [n.span for n in nodes[1 + n_p:] if n.parent == 1 + p]
        nodes[1 + p].span = (spans[0][0], spans[-1][1])

    for e in range(n_e):
        sentence = nodes[1 + n_p + int(rng.integers(0, n_s))]
        start = int(rng.integers(sentence.span[0], sentence.span[1]))
        nodes.append(Node(len(nodes), NodeLevel.ENTITY, (start, start + 1), f"entity {e}",
                          parent=sentence.index, title=sentence.title))

    edges: List[Tuple[int, int, EdgeType]] = [(0, 1, EdgeType.QP1)]
    for a in range(1, 1 + n_p):
        for b in range(a + 1, 1 + n_p):
            edges.append((a, b, EdgeType.PP))
    sentences = nodes[1 + n_p:1 + n_p + n_s]
    for left, right in zip(sentences, sentences[1:]):
        if left.parent == right.parent:
            edges.append((left.index, right.index, EdgeType.SS))
    for sentence in sentences:
        edges.append((sentence.parent, sentence.index, EdgeType.PS))
    if n_p > 1:
        linking = sentences[0]
        target = 2 if linking.parent == 1 else 1
        edges.append((target, linking.index, EdgeType.P2S_HYPER))
    entities = nodes[1 + n_p + n_s:]
    for entity in entities:
        if rng.random() < 0.5:
            edges.append((0, entity.index, EdgeType.QE))
        edges.append((entity.parent, entity.index, EdgeType.SE))
    if qs_edges:
        for sentence in sentences:
            edges.append((0, sentence.index, EdgeType.QS))
    for index in range(len(nodes)):
        edges.append((index, index, EdgeType.SELF))

    return HierarchicalGraph(
        nodes=nodes, edges=edges, n_p=n_p, n_s=n_s, n_e=n_e,
        question_tokens=[f"q{i}" for i in range(question_length)],
        context_tokens=context_tokens,
        token_sentence=np.array(token_sentence, dtype=np.int64),
        paragraph_indices=list(range(n_p)),
    )
