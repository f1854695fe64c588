from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, root_validator, validator


class QuestionType(str, Enum):
    BRIDGE = "bridge"
    COMPARISON = "comparison"


class Sentence(BaseModel):
    text: str
    tokens: List[str]


class Paragraph(BaseModel):
    title: str
    sentences: List[Sentence]
    # (sentence_index, target_title)
    hyperlinks: List[Tuple[int, str]] = Field(default_factory=list)

    @validator("title")
    def title_not_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("Paragraph title must not be empty")
        return value

    @root_validator(skip_on_failure=True)
    def hyperlinks_in_range(cls, values):
        count = len(values["sentences"])
        for sentence_index, _ in values["hyperlinks"]:
            if not 0 <= sentence_index < count:
                raise ValueError(f"Hyperlink from sentence {sentence_index} out of range")
        return values


class QAExample(BaseModel):
    id: str
    question: str
    question_tokens: List[str]
    paragraphs: List[Paragraph]
    answer: str
    # (paragraph_title, sentence_index)
    supporting_facts: List[Tuple[str, int]] = Field(default_factory=list)
    qtype: QuestionType

    @validator("paragraphs")
    def has_paragraphs(cls, value: List[Paragraph]) -> List[Paragraph]:
        if not value:
            raise ValueError("no paragraphs")
        return value

    @root_validator(skip_on_failure=True)
    def facts_reference_context(cls, values):
        lengths = {p.title: len(p.sentences) for p in values["paragraphs"]}
        for title, sentence_index in values["supporting_facts"]:
            if title not in lengths:
                raise ValueError(f"Supporting fact references unknown paragraph: {title}")
            if not 0 <= sentence_index < lengths[title]:
                raise ValueError(
                    f"Supporting fact ({title}, {sentence_index}) out of range"
                )
        return values

    def paragraph_index(self, title: str) -> Optional[int]:
        for index, paragraph in enumerate(self.paragraphs):
            if paragraph.title == title:
                return index
        return None

    def gold_paragraph_indices(self) -> List[int]:
        titles = {title for title, _ in self.supporting_facts}
        return [i for i, p in enumerate(self.paragraphs) if p.title in titles]


class SynthConfig(BaseModel):
    num_examples: int = 500
    vocab_size: int = 5000
    num_entities: int = 200
    sentences_per_paragraph: int = 3
    distractor_count: int = 8
    bridge_fraction: float = 0.5
    seed: int = 7

    @validator("num_examples", "vocab_size", "num_entities", "sentences_per_paragraph",
               "distractor_count")
    def positive_count(cls, value: int, field) -> int:
        if value <= 0:
            raise ValueError(f"{field.name} must be positive, got {value}")
        return value

    @validator("bridge_fraction")
    def fraction_in_unit_interval(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"bridge_fraction must lie in [0, 1], got {value}")
        return value
