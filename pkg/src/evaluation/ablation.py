"""Propagation-order ablation: one model per configuration, shared seed, one comparison table."""
from typing import List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel

from src.common.errors import ConfigError
from src.common.logging import get_logger
from src.corpus.models import QAExample
from src.evaluation.predictor import Predictor
from src.evaluation.scorer import MetricsReport, score
from src.model.config import ModelConfig, ReasoningMode, format_level_order, parse_level_order
from src.training.trainer import TrainConfig, Trainer

logger = get_logger(__name__)

COMBINED_ORDER = "s,e,p"


class AblationRun(BaseModel):
    name: str
    mode: ReasoningMode
    level_order: str = "p,s,e"
    qs_edges: Optional[bool] = None  # None keeps the base config's setting

    def model_config(self, base: ModelConfig) -> ModelConfig:
        raw = base.dict()
        raw["gath"].update(mode=self.mode, level_order=parse_level_order(self.level_order))
        if self.qs_edges is not None:
            raw["graph"].update(qs_edges=self.qs_edges)
        return ModelConfig.parse_obj(raw)


class AblationRow(BaseModel):
    name: str
    report: MetricsReport


class AblationReport(BaseModel):
    rows: List[AblationRow]

    def table(self) -> pd.DataFrame:
        columns = pd.MultiIndex.from_product(
            [["Answer", "Support", "Joint"], ["EM", "F1", "P", "R"]]
        )
        values = []
        for row in self.rows:
            line = []
            for block in (row.report.answer, row.report.support, row.report.joint):
                line.extend([block.em, block.f1, block.precision, block.recall])
            values.append(line)
        return pd.DataFrame(values, index=[row.name for row in self.rows], columns=columns)

    def to_text(self) -> str:
        return self.table().to_string(float_format=lambda v: f"{v:.4f}")


def order_runs(orders: Sequence[str], qs_edges: Optional[bool] = None) -> List[AblationRun]:
    runs = []
    for order in orders:
        parsed = parse_level_order(order)
        runs.append(AblationRun(
            name=f"GATH({format_level_order(parsed)})",
            mode=ReasoningMode.GATH,
            level_order=order,
            qs_edges=qs_edges,
        ))
    return runs


def baseline_runs() -> List[AblationRun]:
    return [
        AblationRun(name="GAT 1-layer", mode=ReasoningMode.GAT_1LAYER, qs_edges=False),
        AblationRun(name="GAT 2-layer", mode=ReasoningMode.GAT_2LAYER, qs_edges=False),
        AblationRun(name="GAT 1-layer + QS", mode=ReasoningMode.GAT_1LAYER, qs_edges=True),
    ]


def combined_run() -> AblationRun:
    order = format_level_order(parse_level_order(COMBINED_ORDER))
    return AblationRun(name=f"GATH({order}) + QS", mode=ReasoningMode.GATH,
                       level_order=COMBINED_ORDER, qs_edges=True)


def plan_runs(orders: Sequence[str], baselines: bool = False) -> List[AblationRun]:
    if not orders:
        raise ConfigError("ablation needs at least one level order")
    if not baselines:
        return order_runs(orders)
    return baseline_runs() + order_runs(orders) + [combined_run()]


def run_configuration(run: AblationRun, train_examples: List[QAExample],
                      eval_examples: List[QAExample], train_config: TrainConfig,
                      base: ModelConfig) -> MetricsReport:
    result = Trainer(run.model_config(base), train_config).fit(train_examples, eval_examples)
    predictions = Predictor(result.network, result.vocab, train_config.jobs).predict(eval_examples)
    return score(predictions, eval_examples)


def ablate_orders(train_examples: List[QAExample], orders: Sequence[str],
                  train_config: Optional[TrainConfig] = None,
                  eval_examples: Optional[List[QAExample]] = None,
                  model_config: Optional[ModelConfig] = None,
                  baselines: bool = False) -> AblationReport:
    """Train and score each configuration in a fixed order under the same seed."""
    runs = plan_runs(orders, baselines)
    train_config = train_config or TrainConfig()
    base = model_config or ModelConfig()
    eval_examples = eval_examples or train_examples
    rows = []
    for run in runs:
        report = run_configuration(run, train_examples, eval_examples, train_config, base)
        logger.info("ablation_row_finished", name=run.name, joint_f1=report.joint.f1,
                    answer_em=report.answer.em, support_f1=report.support.f1)
        rows.append(AblationRow(name=run.name, report=report))
    return AblationReport(rows=rows)
