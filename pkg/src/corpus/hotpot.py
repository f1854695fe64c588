"""HotpotQA distractor-setting ingestion and the internal NDJSON dataset format.

Internal format: one JSON object per line, the `QAExample` schema
(see docs/formats.md). Lines are written with sorted keys so a dataset
produced under a fixed seed is byte-stable.
"""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple, Union

from pydantic import ValidationError

from src.common.errors import DataFormatError
from src.common.logging import get_logger
from src.corpus.models import Paragraph, QAExample, QuestionType, Sentence
from src.corpus.text import contains_sequence, normalize_answer, tokenize

logger = get_logger(__name__)

REQUIRED_FIELDS = ["_id", "question", "answer", "type", "supporting_facts", "context"]


def infer_hyperlinks(paragraphs: List[Paragraph]) -> List[Paragraph]:
    """Link a sentence to every other paragraph whose title tokens it mentions."""
    titles = [(p.title, normalize_answer(p.title)) for p in paragraphs]
    linked = []
    for paragraph in paragraphs:
        links = list(paragraph.hyperlinks)
        existing = set(links)
        for index, sentence in enumerate(paragraph.sentences):
            words = normalize_answer(sentence.text)
            for title, title_words in titles:
                if title == paragraph.title or (index, title) in existing:
                    continue
                if contains_sequence(words, title_words):
                    links.append((index, title))
                    existing.add((index, title))
        linked.append(paragraph.copy(update={"hyperlinks": links}))
    return linked


def parse_record(record: Dict[str, Any]) -> QAExample:
    """Parse and validate one record of an official distractor-setting file."""
    record_id = record.get("_id", "<unknown>")
    for field in REQUIRED_FIELDS:
        if field not in record:
            raise DataFormatError(f"Record {record_id}: missing required field: {field}")
    if not record["context"]:
        raise DataFormatError(f"Record {record_id}: no paragraphs")

    paragraphs = []
    for entry in record["context"]:
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise DataFormatError(f"Record {record_id}: malformed context entry")
        title, sentences = entry
        paragraphs.append(Paragraph(
            title=title,
            sentences=[Sentence(text=s, tokens=tokenize(s)) for s in sentences],
        ))
    paragraphs = infer_hyperlinks(paragraphs)

    lengths = {p.title: len(p.sentences) for p in paragraphs}
    facts: List[Tuple[str, int]] = []
    for fact in record["supporting_facts"]:
        title, sentence_index = fact[0], int(fact[1])
        if title in lengths and 0 <= sentence_index < lengths[title]:
            facts.append((title, sentence_index))
        else:
            logger.warning("supporting_fact_dropped", record_id=record_id, title=title,
                           sentence_index=sentence_index)

    try:
        return QAExample(
            id=record_id,
            question=record["question"],
            question_tokens=tokenize(record["question"]),
            paragraphs=paragraphs,
            answer=record["answer"],
            supporting_facts=facts,
            qtype=QuestionType(record["type"]),
        )
    except (ValidationError, ValueError) as e:
        raise DataFormatError(f"Record {record_id}: {e}") from e


def load_hotpot(path: Union[str, Path]) -> List[QAExample]:
    with open(path, encoding="utf-8") as f:
        try:
            records = json.load(f)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"{path}: not a JSON document ({e})") from e
    if not isinstance(records, list):
        raise DataFormatError(f"{path}: expected a JSON array of records")
    examples = [parse_record(record) for record in records]
    logger.info("hotpot_loaded", path=str(path), count=len(examples))
    return examples


def dump_example(example: QAExample) -> str:
    return json.dumps(json.loads(example.json()), sort_keys=True, ensure_ascii=False)


def write_dataset(examples: Iterable[QAExample], path: Union[str, Path]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for example in examples:
            f.write(dump_example(example) + "\n")
            count += 1
    logger.info("dataset_written", path=str(path), count=count)
    return count


def read_dataset(path: Union[str, Path]) -> List[QAExample]:
    examples = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                examples.append(QAExample.parse_raw(line))
            except ValidationError as e:
                raise DataFormatError(f"{path}:{line_number}: {e}") from e
    logger.info("dataset_loaded", path=str(path), count=len(examples))
    return examples


def load_any(path: Union[str, Path]) -> List[QAExample]:
    """Read either the internal NDJSON format or an official JSON array file."""
    with open(path, encoding="utf-8") as f:
        head = f.read(1024).lstrip()
    if head.startswith("["):
        return load_hotpot(path)
    return read_dataset(path)
