from enum import Enum
from typing import List

from pydantic import BaseModel, root_validator, validator

from src.common.errors import ConfigError
from src.graph.models import GraphConfig, NodeLevel

REASONING_LEVELS = [NodeLevel.PARAGRAPH, NodeLevel.SENTENCE, NodeLevel.ENTITY]


class ReasoningMode(str, Enum):
    GAT_1LAYER = "gat1"
    GAT_2LAYER = "gat2"
    GATH = "gath"


def parse_level_order(text: str) -> List[List[NodeLevel]]:
    """Parse "s,e,p" (one level per stage) or "p+s+e" (levels sharing a stage).

    Stages are separated by ',' or '/', levels within a stage by '+'.
    """
    cleaned = text.strip().lower().replace("/", ",")
    if not cleaned:
        raise ConfigError("empty level order")
    allowed = {level.value for level in NodeLevel}
    order = []
    for stage in cleaned.split(","):
        names = [name.strip() for name in stage.split("+") if name.strip()]
        if not names:
            raise ConfigError(f"empty stage in level order '{text}'")
        for name in names:
            if name not in allowed:
                raise ConfigError(
                    f"unknown level '{name}' in level order '{text}'; allowed: q, p, s, e"
                )
        order.append([NodeLevel(name) for name in names])
    return order


def format_level_order(order: List[List[NodeLevel]]) -> str:
    return "/".join("+".join(level.value.upper() for level in stage) for stage in order)


class EncoderConfig(BaseModel):
    vocab_size: int = 5000
    d: int = 32
    dropout_encoder: float = 0.2
    use_bi_attention: bool = True
    max_positions: int = 1024

    @validator("vocab_size", "d", "max_positions")
    def positive(cls, value: int, field) -> int:
        if value <= 0:
            raise ValueError(f"{field.name} must be positive, got {value}")
        return value

    @validator("dropout_encoder")
    def dropout_range(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"dropout_encoder must lie in [0, 1), got {value}")
        return value


class GATHConfig(BaseModel):
    K: int = 4
    d: int = 32
    level_order: List[List[NodeLevel]] = [[NodeLevel.PARAGRAPH], [NodeLevel.SENTENCE], [NodeLevel.ENTITY]]
    include_query_level: bool = False
    mode: ReasoningMode = ReasoningMode.GATH
    dropout: float = 0.3
    slope: float = 0.2
    per_stage_params: bool = False

    @validator("level_order", pre=True)
    def parse_order(cls, value):
        if isinstance(value, str):
            return parse_level_order(value)
        return value

    @validator("dropout")
    def dropout_range(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {value}")
        return value

    @validator("slope")
    def slope_range(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"slope must lie in (0, 1), got {value}")
        return value

    @root_validator(skip_on_failure=True)
    def heads_and_levels(cls, values):
        if values["K"] <= 0 or values["d"] % values["K"] != 0:
            raise ValueError(f"K={values['K']} must divide d={values['d']}")
        included = set(cls.included(values["include_query_level"]))
        listed = [level for stage in values["level_order"] for level in stage]
        if any(not stage for stage in values["level_order"]):
            raise ValueError("every level group must be non-empty")
        if len(listed) != len(set(listed)) or set(listed) != included:
            names = ",".join(sorted(level.value for level in included))
            raise ValueError(f"level_order must cover each of {{{names}}} exactly once")
        return values

    @staticmethod
    def included(include_query_level: bool) -> List[NodeLevel]:
        levels = list(REASONING_LEVELS)
        return [NodeLevel.QUERY] + levels if include_query_level else levels

    @property
    def included_levels(self) -> List[NodeLevel]:
        return self.included(self.include_query_level)

    @property
    def head_width(self) -> int:
        return self.d // self.K

    def num_param_sets(self) -> int:
        if self.mode == ReasoningMode.GAT_2LAYER:
            return 2
        if self.mode == ReasoningMode.GATH and self.per_stage_params:
            return len(self.level_order)
        return 1

    def describe(self) -> str:
        if self.mode == ReasoningMode.GAT_1LAYER:
            return "GAT 1-layer"
        if self.mode == ReasoningMode.GAT_2LAYER:
            return "GAT 2-layer"
        return f"GATH({format_level_order(self.level_order)})"


class HeadConfig(BaseModel):
    max_span: int = 30
    support_threshold: float = 0.5
    span_reads_sentence: bool = True
    evidence_summary: bool = True

    @validator("max_span")
    def positive_span(cls, value: int) -> int:
        if value <= 0:
            raise ValueError(f"max_span must be positive, got {value}")
        return value


class LossWeights(BaseModel):
    lambda1: float = 1.0
    lambda2: float = 2.0
    lambda3: float = 1.0
    lambda4: float = 1.0

    @validator("lambda1", "lambda2", "lambda3", "lambda4")
    def nonnegative(cls, value: float, field) -> float:
        if value < 0:
            raise ValueError(f"{field.name} must be nonnegative, got {value}")
        return value


class ModelConfig(BaseModel):
    encoder: EncoderConfig = EncoderConfig()
    gath: GATHConfig = GATHConfig()
    heads: HeadConfig = HeadConfig()
    graph: GraphConfig = GraphConfig()
    loss: LossWeights = LossWeights()

    @root_validator(skip_on_failure=True)
    def widths_agree(cls, values):
        if values["encoder"].d != values["gath"].d:
            raise ValueError(
                f"encoder width d={values['encoder'].d} differs from graph width d={values['gath'].d}"
            )
        return values
