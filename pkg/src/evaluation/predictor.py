import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Tuple

from pydantic import ValidationError

from src.common.errors import DataFormatError
from src.common.logging import get_logger
from src.corpus.models import QAExample
from src.corpus.vocab import Vocabulary
from src.evaluation.scorer import Predictions
from src.model.network import HierarchicalGraphNetwork
from src.training.features import prepare_example

logger = get_logger(__name__)


class Predictor:
    """Runs a trained network over examples and collects the official prediction shape."""

    def __init__(self, network: HierarchicalGraphNetwork, vocab: Vocabulary, jobs: int = 1):
        self.network = network
        self.vocab = vocab
        self.jobs = jobs

    def predict_example(self, ex: QAExample) -> Tuple[str, List[Tuple[str, int]]]:
        prepared = prepare_example(ex, self.vocab, self.network.config.graph)
        return self.network.predict(prepared.graph, prepared.question_ids, prepared.context_ids)

    def predict(self, examples: List[QAExample]) -> Predictions:
        if self.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                results = list(pool.map(self.predict_example, examples))
        else:
            results = [self.predict_example(ex) for ex in examples]
        predictions = Predictions()
        for ex, (answer, supports) in zip(examples, results):
            predictions.answer[ex.id] = answer
            predictions.sp[ex.id] = supports
        logger.info("predictions_made", count=len(examples))
        return predictions


def write_predictions(predictions: Predictions, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "answer": predictions.answer,
        "sp": {key: [[title, index] for title, index in facts] for key, facts in predictions.sp.items()},
    }
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True))
    return path


def read_predictions(path: Path) -> Predictions:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"Prediction file {path}: invalid JSON: {exc}") from exc
    for field in ("answer", "sp"):
        if field not in raw:
            raise DataFormatError(f"Prediction file {path}: missing required field: {field}")
    try:
        return Predictions.parse_obj(raw)
    except ValidationError as exc:
        raise DataFormatError(f"Prediction file {path}: {exc}") from exc
