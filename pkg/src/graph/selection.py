from typing import List, Sequence

from src.corpus.models import QAExample
from src.corpus.text import contains_sequence, normalize_answer


def first_hop(ex: QAExample, candidates: Sequence[int]) -> List[int]:
    """Paragraphs whose normalized title occurs in the normalized question."""
    question = normalize_answer(ex.question)
    return [i for i in candidates if contains_sequence(question, normalize_answer(ex.paragraphs[i].title))]


def overlap_score(ex: QAExample, paragraph_index: int) -> int:
    question = set(normalize_answer(ex.question))
    paragraph = ex.paragraphs[paragraph_index]
    words = set(normalize_answer(paragraph.title))
    for sentence in paragraph.sentences:
        words.update(normalize_answer(sentence.text))
    return len(question & words)


def select_paragraphs(ex: QAExample, max_paragraphs: int = 4, force_gold: bool = False) -> List[int]:
    """Rank paragraphs first-hop, then second-hop, then by question overlap; keep the top ones.

    With `force_gold` (training), gold paragraphs missing from the cut replace
    the lowest-ranked non-gold picks.
    """
    if not ex.paragraphs:
        return []
    everything = list(range(len(ex.paragraphs)))
    ranking = first_hop(ex, everything)

    titles = {p.title: i for i, p in enumerate(ex.paragraphs)}
    for source in list(ranking):
        paragraph = ex.paragraphs[source]
        for _, target in sorted(paragraph.hyperlinks, key=lambda link: link[0]):
            target_index = titles.get(target)
            if target_index is not None and target_index not in ranking:
                ranking.append(target_index)

    rest = [i for i in everything if i not in ranking]
    # stable sort keeps original order among ties
    rest.sort(key=lambda i: -overlap_score(ex, i))
    ranking.extend(rest)
    selected = ranking[:max_paragraphs]

    if force_gold:
        gold = ex.gold_paragraph_indices()
        for missing in [i for i in gold if i not in selected]:
            for position in range(len(selected) - 1, -1, -1):
                if selected[position] not in gold:
                    selected[position] = missing
                    break
        selected = [i for i in ranking if i in selected]
    return selected
