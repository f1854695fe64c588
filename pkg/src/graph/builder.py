from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.common.errors import GraphError
from src.common.logging import get_logger
from src.corpus.models import QAExample
from src.corpus.text import normalize_text
from src.graph.entities import EntitySpan, extract_entities, question_entities
from src.graph.models import EdgeType, GraphConfig, HierarchicalGraph, Node, NodeLevel
from src.graph.selection import first_hop

logger = get_logger(__name__)

# stands in for a sentence that tokenizes to nothing so every node keeps a non-empty span
EMPTY_SENTENCE_TOKEN = "."


class GraphBuilder:
    """Assembles the hierarchical graph of one example over a paragraph selection."""

    def __init__(self, config: Optional[GraphConfig] = None):
        self.config = config or GraphConfig()

    def build(self, ex: QAExample, selected: Sequence[int]) -> HierarchicalGraph:
        if not selected:
            raise GraphError(f"Example {ex.id}: empty paragraph selection")
        selected = list(selected)

        nodes: List[Node] = [Node(0, NodeLevel.QUERY, (0, len(ex.question_tokens)), ex.question)]
        context_tokens: List[str] = []
        token_sentence: List[int] = []

        n_p = len(selected)
        sentence_keys: List[Tuple[int, int]] = []  # (paragraph position, sentence index)
        for position, paragraph_index in enumerate(selected):
            paragraph = ex.paragraphs[paragraph_index]
            nodes.append(Node(1 + position, NodeLevel.PARAGRAPH, (0, 0), paragraph.title,
                              title=paragraph.title))
            for sentence_index in range(len(paragraph.sentences)):
                sentence_keys.append((position, sentence_index))
        if any(not ex.paragraphs[i].sentences for i in selected):
            raise GraphError(f"Example {ex.id}: selected paragraph without sentences")

        n_s = len(sentence_keys)
        first_sentence = 1 + n_p
        for offset, (position, sentence_index) in enumerate(sentence_keys):
            paragraph = ex.paragraphs[selected[position]]
            tokens = paragraph.sentences[sentence_index].tokens or [EMPTY_SENTENCE_TOKEN]
            start = len(context_tokens)
            context_tokens.extend(tokens)
            token_sentence.extend([first_sentence + offset] * len(tokens))
            nodes.append(Node(first_sentence + offset, NodeLevel.SENTENCE,
                              (start, len(context_tokens)),
                              paragraph.sentences[sentence_index].text,
                              parent=1 + position, title=paragraph.title,
                              sentence_index=sentence_index))

        for position in range(n_p):
            spans = [n.span for n in nodes[first_sentence:] if n.parent == 1 + position]
            nodes[1 + position].span = (spans[0][0], spans[-1][1])

        entity_spans: List[List[EntitySpan]] = (
            extract_entities(ex, selected) if self.config.extract_entities else [[] for _ in sentence_keys]
        )
        first_entity = first_sentence + n_s
        for offset, spans in enumerate(entity_spans):
            sentence_node = nodes[first_sentence + offset]
            for span in spans:
                if len(nodes) - first_entity >= self.config.max_entities:
                    break
                base = sentence_node.span[0]
                nodes.append(Node(len(nodes), NodeLevel.ENTITY,
                                  (base + span.start, base + span.end), span.text,
                                  parent=sentence_node.index, title=sentence_node.title))
        n_e = len(nodes) - first_entity

        edges = self._edges(ex, selected, nodes, n_p, n_s, n_e)
        graph = HierarchicalGraph(
            nodes=nodes, edges=edges, n_p=n_p, n_s=n_s, n_e=n_e,
            question_tokens=list(ex.question_tokens), context_tokens=context_tokens,
            token_sentence=np.array(token_sentence, dtype=np.int64),
            paragraph_indices=selected,
        )
        logger.debug("graph_built", example_id=ex.id, g=graph.g, edges=len(edges))
        return graph

    def _edges(self, ex: QAExample, selected: List[int], nodes: List[Node],
               n_p: int, n_s: int, n_e: int) -> List[Tuple[int, int, EdgeType]]:
        edges: List[Tuple[int, int, EdgeType]] = []
        seen: Set[Tuple[int, int, EdgeType]] = set()

        def add(src: int, dst: int, edge_type: EdgeType) -> None:
            key = (src, dst, edge_type)
            if key not in seen:
                seen.add(key)
                edges.append(key)

        paragraph_node = {paragraph_index: 1 + pos for pos, paragraph_index in enumerate(selected)}
        title_node = {ex.paragraphs[i].title: node for i, node in paragraph_node.items()}
        sentences = nodes[1 + n_p: 1 + n_p + n_s]
        entities = nodes[1 + n_p + n_s:]

        # (i) question - first-hop paragraphs
        for paragraph_index in first_hop(ex, selected):
            add(0, paragraph_node[paragraph_index], EdgeType.QP1)
        # (ii) all paragraph pairs
        for a in range(1, 1 + n_p):
            for b in range(a + 1, 1 + n_p):
                add(a, b, EdgeType.PP)
        # (iii) sentences of the same paragraph
        by_paragraph: Dict[int, List[Node]] = {}
        for sentence in sentences:
            by_paragraph.setdefault(sentence.parent, []).append(sentence)
        for members in by_paragraph.values():
            for i, left in enumerate(members):
                partners = members[i + 1:] if self.config.sentence_edges == "all" else members[i + 1:i + 2]
                for right in partners:
                    add(left.index, right.index, EdgeType.SS)
        # (iv) paragraph - its sentences
        for sentence in sentences:
            add(sentence.parent, sentence.index, EdgeType.PS)
        # (v) hyperlinked paragraph - linking sentence
        sentence_node = {(s.title, s.sentence_index): s.index for s in sentences}
        for paragraph_index in selected:
            paragraph = ex.paragraphs[paragraph_index]
            for sentence_index, target in paragraph.hyperlinks:
                target_node = title_node.get(target)
                if target_node is None or target == paragraph.title:
                    continue
                add(target_node, sentence_node[(paragraph.title, sentence_index)], EdgeType.P2S_HYPER)
        # (vi) question - matching entities
        mentioned = question_entities(ex, selected)
        for entity in entities:
            if normalize_text(entity.text) in mentioned:
                add(0, entity.index, EdgeType.QE)
        # (vii) sentence - its entities
        for entity in entities:
            add(entity.parent, entity.index, EdgeType.SE)
        # (viii) question - every sentence
        if self.config.qs_edges:
            for sentence in sentences:
                add(0, sentence.index, EdgeType.QS)
        for index in range(1 + n_p + n_s + n_e):
            add(index, index, EdgeType.SELF)
        return edges


def build_graph(ex: QAExample, selected: Sequence[int],
                config: Optional[GraphConfig] = None) -> HierarchicalGraph:
    return GraphBuilder(config).build(ex, selected)
