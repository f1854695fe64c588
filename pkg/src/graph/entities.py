"""Rule-based entity spans: maximal capitalized runs plus paragraph-title mentions."""
from dataclasses import dataclass
from typing import List, Sequence, Set

from src.corpus.models import QAExample
from src.corpus.text import find_sequence, normalize_text, tokenize

# capitalized function words never start an entity
LEADING_STOPWORDS = {
    "a", "an", "the", "in", "on", "at", "of", "for", "by", "with", "from", "to", "and",
    "or", "but", "is", "was", "are", "were", "what", "which", "who", "whom", "whose",
    "where", "when", "why", "how", "did", "does", "do", "this", "that", "these", "those",
    "it", "its", "he", "she", "they", "his", "her", "their", "there", "as", "after",
    "before", "during", "since",
}


@dataclass(frozen=True)
class EntitySpan:
    # token offsets [start, end) within the sentence
    start: int
    end: int
    text: str

    @property
    def key(self) -> str:
        return normalize_text(self.text)


def _is_capitalized(token: str) -> bool:
    return bool(token) and token[0].isupper()


def capitalized_spans(tokens: Sequence[str]) -> List[EntitySpan]:
    spans = []
    i = 0
    while i < len(tokens):
        if not _is_capitalized(tokens[i]):
            i += 1
            continue
        j = i
        while j < len(tokens) and _is_capitalized(tokens[j]):
            j += 1
        start = i
        while start < j and tokens[start].lower() in LEADING_STOPWORDS:
            start += 1
        if start < j:
            spans.append(EntitySpan(start, j, " ".join(tokens[start:j])))
        i = j
    return spans


def title_spans(tokens: Sequence[str], titles: Sequence[str]) -> List[EntitySpan]:
    lowered = [t.lower() for t in tokens]
    spans = []
    for title in titles:
        needle = [t.lower() for t in tokenize(title)]
        position = find_sequence(lowered, needle)
        while position >= 0:
            end = position + len(needle)
            spans.append(EntitySpan(position, end, " ".join(tokens[position:end])))
            position = find_sequence(lowered, needle, position + 1)
    return spans


def sentence_entities(tokens: Sequence[str], titles: Sequence[str]) -> List[EntitySpan]:
    """Entities of one sentence, deduplicated by normalized text, ordered by position."""
    candidates = sorted(
        capitalized_spans(tokens) + title_spans(tokens, titles),
        key=lambda span: (span.start, span.end),
    )
    seen: Set[str] = set()
    unique = []
    for span in candidates:
        if span.key and span.key not in seen:
            seen.add(span.key)
            unique.append(span)
    return unique


def extract_entities(ex: QAExample, selected: Sequence[int]) -> List[List[EntitySpan]]:
    """Entity spans for every sentence of the selected paragraphs, in selection order."""
    titles = [ex.paragraphs[i].title for i in selected]
    return [
        sentence_entities(sentence.tokens, titles)
        for i in selected
        for sentence in ex.paragraphs[i].sentences
    ]


def question_entities(ex: QAExample, selected: Sequence[int]) -> Set[str]:
    """Normalized entity strings mentioned by the question."""
    titles = [ex.paragraphs[i].title for i in selected]
    return {span.key for span in sentence_entities(ex.question_tokens, titles)}
