"""Turn QA examples into graph + token ids + supervision targets."""
from dataclasses import dataclass
from typing import List, Optional, Set, Tuple

import numpy as np

from src.common.logging import get_logger
from src.corpus.models import QAExample
from src.corpus.text import find_sequence, normalize_answer, normalize_text
from src.corpus.vocab import Vocabulary
from src.graph.builder import GraphBuilder
from src.graph.models import GraphConfig, HierarchicalGraph, NodeLevel
from src.graph.selection import select_paragraphs
from src.model.heads import NO, SPAN, YES, Targets

logger = get_logger(__name__)


@dataclass
class PreparedExample:
    example: QAExample
    graph: HierarchicalGraph
    question_ids: np.ndarray
    context_ids: np.ndarray
    targets: Targets


def answer_type(answer: str) -> int:
    normalized = normalize_text(answer)
    if normalized == "yes":
        return YES
    if normalized == "no":
        return NO
    return SPAN


def locate_answer(tokens: List[str], answer: str) -> Optional[Tuple[int, int]]:
    """First occurrence of the normalized answer among the context tokens, as inclusive token bounds."""
    needle = normalize_answer(answer)
    if not needle:
        return None
    positions, words = [], []
    for position, token in enumerate(tokens):
        # one raw token may normalize to several words or to nothing
        for word in normalize_answer(token):
            positions.append(position)
            words.append(word)
    found = find_sequence(words, needle)
    if found < 0:
        return None
    return positions[found], positions[found + len(needle) - 1]


def locate_in_supports(graph: HierarchicalGraph, facts: Set[Tuple[str, int]],
                       answer: str) -> Optional[Tuple[int, int]]:
    """Answer bounds inside the first supporting sentence (node order) that contains it."""
    for node in graph.sentence_nodes():
        if (node.title, node.sentence_index) not in facts:
            continue
        start, end = node.span
        located = locate_answer(graph.context_tokens[start:end], answer)
        if located is not None:
            return located[0] + start, located[1] + start
    return None


def build_targets(ex: QAExample, graph: HierarchicalGraph) -> Targets:
    facts = {(title, index) for title, index in ex.supporting_facts}
    gold_titles = {title for title, _ in facts}
    para = np.array(
        [1.0 if graph.nodes[i].title in gold_titles else 0.0 for i in graph.level_range(NodeLevel.PARAGRAPH)]
    )
    sent = np.array(
        [1.0 if (node.title, node.sentence_index) in facts else 0.0 for node in graph.sentence_nodes()]
    )

    kind = answer_type(ex.answer)
    start = end = None
    if kind == SPAN:
        located = locate_in_supports(graph, facts, ex.answer) or locate_answer(graph.context_tokens, ex.answer)
        if located is None:
            logger.debug("answer_not_located", example_id=ex.id)
        else:
            start, end = located

    entity = None
    key = normalize_text(ex.answer)
    for offset, node_index in enumerate(graph.level_range(NodeLevel.ENTITY)):
        if normalize_text(graph.nodes[node_index].text) == key:
            entity = offset
            break

    return Targets(para=para, sent=sent, answer_type=kind, start=start, end=end, entity=entity)


def prepare_example(ex: QAExample, vocab: Vocabulary, graph_config: Optional[GraphConfig] = None,
                    training: bool = False) -> PreparedExample:
    graph_config = graph_config or GraphConfig()
    selected = select_paragraphs(ex, graph_config.max_paragraphs, force_gold=training)
    graph = GraphBuilder(graph_config).build(ex, selected)
    return PreparedExample(
        example=ex,
        graph=graph,
        question_ids=vocab.encode(graph.question_tokens),
        context_ids=vocab.encode(graph.context_tokens),
        targets=build_targets(ex, graph),
    )


def prepare_dataset(examples: List[QAExample], vocab: Vocabulary,
                    graph_config: Optional[GraphConfig] = None,
                    training: bool = False) -> List[PreparedExample]:
    return [prepare_example(ex, vocab, graph_config, training) for ex in examples]
