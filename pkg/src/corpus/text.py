import re
import string
from typing import List, Sequence

_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_ARTICLES = re.compile(r"\b(a|an|the)\b", re.UNICODE)
_PUNCTUATION = set(string.punctuation)
_NO_SPACE_BEFORE = re.compile(r"\s+([,.;:!?)\]}%'])")
_NO_SPACE_AFTER = re.compile(r"([(\[{$])\s+")


def tokenize(text: str) -> List[str]:
    """Whitespace tokenization with punctuation detached into its own tokens."""
    return _TOKEN.findall(text)


def detokenize(tokens: Sequence[str]) -> str:
    text = " ".join(tokens)
    text = _NO_SPACE_BEFORE.sub(r"\1", text)
    return _NO_SPACE_AFTER.sub(r"\1", text)


def normalize_text(s: str) -> str:
    """Official HotpotQA answer normalization: lower, strip punctuation, drop articles, fix spaces."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCTUATION)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def normalize_answer(s: str) -> List[str]:
    return normalize_text(s).split()


def contains_sequence(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    return find_sequence(haystack, needle) >= 0


def find_sequence(haystack: Sequence[str], needle: Sequence[str], start: int = 0) -> int:
    """Index of the first contiguous occurrence of needle at or after start, or -1."""
    width = len(needle)
    if width == 0:
        return -1
    for i in range(start, len(haystack) - width + 1):
        if list(haystack[i:i + width]) == list(needle):
            return i
    return -1
