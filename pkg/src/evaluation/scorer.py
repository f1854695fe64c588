"""Answer / supporting-fact / joint metrics with the official HotpotQA semantics."""
from collections import Counter
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, Field

from src.common.errors import ConfigError
from src.common.logging import get_logger
from src.corpus.models import QAExample, QuestionType
from src.corpus.text import normalize_text

logger = get_logger(__name__)

SPECIAL_ANSWERS = ("yes", "no", "noanswer")


class Category(str, Enum):
    COMP_YN = "comp-yn"
    COMP_SPAN = "comp-span"
    BRIDGE = "bridge"


class Scores(NamedTuple):
    em: float
    f1: float
    precision: float
    recall: float


ZERO = Scores(0.0, 0.0, 0.0, 0.0)


class Predictions(BaseModel):
    answer: Dict[str, str] = Field(default_factory=dict)
    sp: Dict[str, List[Tuple[str, int]]] = Field(default_factory=dict)


class MetricBlock(BaseModel):
    em: float = 0.0
    f1: float = 0.0
    precision: float = 0.0
    recall: float = 0.0


class CategoryRow(BaseModel):
    category: Category
    count: int
    pct: float
    answer_em: float
    support_em: float
    joint_em: float


class MetricsReport(BaseModel):
    count: int
    missing: int = 0
    answer: MetricBlock
    support: MetricBlock
    joint: MetricBlock
    categories: List[CategoryRow] = Field(default_factory=list)

    def table(self) -> pd.DataFrame:
        rows = {
            "Answer": self.answer.dict(),
            "Support": self.support.dict(),
            "Joint": self.joint.dict(),
        }
        frame = pd.DataFrame.from_dict(rows, orient="index")
        frame.columns = ["EM", "F1", "Prec", "Recall"]
        return frame

    def category_table(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            [
                {
                    "Category": row.category.value,
                    "Pct": row.pct,
                    "Ans EM": row.answer_em,
                    "Sup EM": row.support_em,
                    "Joint EM": row.joint_em,
                }
                for row in self.categories
            ],
            columns=["Category", "Pct", "Ans EM", "Sup EM", "Joint EM"],
        )
        return frame.set_index("Category")

    def to_text(self) -> str:
        return "\n\n".join([
            self.table().to_string(float_format=lambda v: f"{v:.4f}"),
            self.category_table().to_string(float_format=lambda v: f"{v:.4f}"),
        ])


def categorize(ex: QAExample) -> Category:
    if ex.qtype == QuestionType.BRIDGE:
        return Category.BRIDGE
    if ex.qtype == QuestionType.COMPARISON:
        if normalize_text(ex.answer) in ("yes", "no"):
            return Category.COMP_YN
        return Category.COMP_SPAN
    raise ConfigError(f"Example {ex.id}: unknown question type: {ex.qtype}")


def answer_scores(prediction: str, gold: str) -> Scores:
    normalized_prediction = normalize_text(prediction)
    normalized_gold = normalize_text(gold)
    em = float(normalized_prediction == normalized_gold)
    if normalized_prediction in SPECIAL_ANSWERS and normalized_prediction != normalized_gold:
        return Scores(em, 0.0, 0.0, 0.0)
    if normalized_gold in SPECIAL_ANSWERS and normalized_prediction != normalized_gold:
        return Scores(em, 0.0, 0.0, 0.0)

    prediction_tokens = normalized_prediction.split()
    gold_tokens = normalized_gold.split()
    common = Counter(prediction_tokens) & Counter(gold_tokens)
    same = sum(common.values())
    if same == 0:
        return Scores(em, 0.0, 0.0, 0.0)
    precision = same / len(prediction_tokens)
    recall = same / len(gold_tokens)
    return Scores(em, 2 * precision * recall / (precision + recall), precision, recall)


def support_scores(prediction: Iterable[Sequence], gold: Iterable[Sequence]) -> Scores:
    predicted = {(str(title), int(index)) for title, index in prediction}
    expected = {(str(title), int(index)) for title, index in gold}
    tp = len(predicted & expected)
    fp = len(predicted - expected)
    fn = len(expected - predicted)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Scores(float(fp + fn == 0), f1, precision, recall)


def joint_scores(answer: Scores, support: Scores) -> Scores:
    precision = answer.precision * support.precision
    recall = answer.recall * support.recall
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Scores(answer.em * support.em, f1, precision, recall)


def _mean_block(values: List[Scores]) -> MetricBlock:
    if not values:
        return MetricBlock()
    n = len(values)
    return MetricBlock(
        em=sum(v.em for v in values) / n,
        f1=sum(v.f1 for v in values) / n,
        precision=sum(v.precision for v in values) / n,
        recall=sum(v.recall for v in values) / n,
    )


def score(predictions: Predictions, gold: Sequence[QAExample]) -> MetricsReport:
    """Average per-example metrics over the gold set; absent predictions score 0."""
    answers: List[Scores] = []
    supports: List[Scores] = []
    joints: List[Scores] = []
    per_category: Dict[Category, List[Tuple[Scores, Scores, Scores]]] = {c: [] for c in Category}
    missing = 0

    for ex in gold:
        answer = support = None
        if ex.id in predictions.answer:
            answer = answer_scores(predictions.answer[ex.id], ex.answer)
        else:
            logger.warning("prediction_missing", example_id=ex.id, part="answer")
        if ex.id in predictions.sp:
            support = support_scores(predictions.sp[ex.id], ex.supporting_facts)
        else:
            logger.warning("prediction_missing", example_id=ex.id, part="sp")
        if answer is None or support is None:
            missing += 1
        joint = joint_scores(answer, support) if answer is not None and support is not None else ZERO
        answer, support = answer or ZERO, support or ZERO

        answers.append(answer)
        supports.append(support)
        joints.append(joint)
        per_category[categorize(ex)].append((answer, support, joint))

    total = len(gold)
    categories = []
    for category, rows in per_category.items():
        count = len(rows)
        categories.append(CategoryRow(
            category=category,
            count=count,
            pct=100.0 * count / total if total else 0.0,
            answer_em=sum(r[0].em for r in rows) / count if count else 0.0,
            support_em=sum(r[1].em for r in rows) / count if count else 0.0,
            joint_em=sum(r[2].em for r in rows) / count if count else 0.0,
        ))

    return MetricsReport(
        count=total,
        missing=missing,
        answer=_mean_block(answers),
        support=_mean_block(supports),
        joint=_mean_block(joints),
        categories=categories,
    )
