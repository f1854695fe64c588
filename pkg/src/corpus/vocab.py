from collections import Counter
from typing import Dict, Iterable, List, Sequence

import numpy as np

from src.corpus.models import QAExample

OOV_TOKEN = "<unk>"


class Vocabulary:
    """Lowercased token vocabulary; id 0 is the out-of-vocabulary row."""

    def __init__(self, tokens: Sequence[str]):
        if not tokens or tokens[0] != OOV_TOKEN:
            tokens = [OOV_TOKEN] + [t for t in tokens if t != OOV_TOKEN]
        self.tokens: List[str] = list(tokens)
        self.index: Dict[str, int] = {token: i for i, token in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        return np.array([self.index.get(t.lower(), 0) for t in tokens], dtype=np.int64)

    @classmethod
    def build(cls, examples: Iterable[QAExample], max_size: int) -> "Vocabulary":
        counts: Counter = Counter()
        for example in examples:
            counts.update(t.lower() for t in example.question_tokens)
            for paragraph in example.paragraphs:
                for sentence in paragraph.sentences:
                    counts.update(t.lower() for t in sentence.tokens)
        # frequency first, then alphabetical so the ranking is stable
        ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
        return cls([OOV_TOKEN] + [token for token, _ in ranked[: max(max_size - 1, 0)]])

    def to_list(self) -> List[str]:
        return list(self.tokens)
