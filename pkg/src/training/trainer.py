"""Mini-batch Adam training on the joint loss.

Per-example gradients are computed on private tapes (optionally on a thread
pool) and summed in batch order, so results do not depend on scheduling.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, validator
from tqdm import tqdm

from src.autodiff.tensor import Tape
from src.common.errors import ConfigError, TrainingDivergedError
from src.common.logging import get_logger
from src.corpus.models import QAExample
from src.corpus.vocab import Vocabulary
from src.model.config import ModelConfig
from src.model.network import HierarchicalGraphNetwork
from src.storage.checkpoint import CheckpointStore
from src.training.features import PreparedExample, prepare_dataset
from src.training.optimizer import Adam

logger = get_logger(__name__)

LOSS_CURVE_FILE = "loss_curve.csv"


class TrainConfig(BaseModel):
    batch_size: int = 16
    learning_rate: float = 1e-3
    epochs: int = 5
    seed: int = 7
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_steps: Optional[int] = None
    jobs: int = 1
    progress: bool = False

    @validator("batch_size", "epochs", "jobs")
    def positive(cls, value: int, field) -> int:
        if value <= 0:
            raise ValueError(f"{field.name} must be positive, got {value}")
        return value

    @validator("learning_rate", "eps")
    def nonnegative(cls, value: float, field) -> float:
        if value < 0:
            raise ValueError(f"{field.name} must be nonnegative, got {value}")
        return value

    @validator("beta1", "beta2")
    def beta_range(cls, value: float, field) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"{field.name} must lie in [0, 1), got {value}")
        return value

    @validator("max_steps")
    def positive_steps(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value <= 0:
            raise ValueError(f"max_steps must be positive, got {value}")
        return value


@dataclass
class TrainResult:
    network: HierarchicalGraphNetwork
    vocab: Vocabulary
    curve: pd.DataFrame
    best_dev_loss: float
    steps: int


def example_rng(seed: int, step: int, position: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, step, position]))


class Trainer:
    def __init__(self, model_config: Optional[ModelConfig] = None,
                 train_config: Optional[TrainConfig] = None):
        self.model_config = model_config or ModelConfig()
        self.train_config = train_config or TrainConfig()

    def _example_gradients(self, network: HierarchicalGraphNetwork, prepared: PreparedExample,
                           rng: np.random.Generator) -> Tuple[float, List[np.ndarray]]:
        with Tape() as tape:
            breakdown = network.loss(prepared.graph, prepared.question_ids, prepared.context_ids,
                                     prepared.targets, training=True, rng=rng)
            grads = tape.gradients(breakdown.total, network.params.tensors())
        return float(breakdown.total.item()), grads

    def batch_gradients(self, network: HierarchicalGraphNetwork, batch: List[PreparedExample],
                        step: int, pool: Optional[ThreadPoolExecutor] = None) -> Tuple[float, List[np.ndarray]]:
        """Mean loss and mean gradient over a batch, reduced in batch order."""
        seed = self.train_config.seed
        jobs = [(prepared, example_rng(seed, step, i)) for i, prepared in enumerate(batch)]
        if pool is None:
            results = [self._example_gradients(network, p, rng) for p, rng in jobs]
        else:
            results = list(pool.map(lambda job: self._example_gradients(network, *job), jobs))

        total_loss = 0.0
        summed = [np.zeros_like(t.data) for t in network.params.tensors()]
        for loss, grads in results:
            total_loss += loss
            for acc, grad in zip(summed, grads):
                acc += grad
        count = len(batch)
        return total_loss / count, [acc / count for acc in summed]

    def evaluate_loss(self, network: HierarchicalGraphNetwork, dataset: List[PreparedExample]) -> float:
        losses = [
            network.loss(p.graph, p.question_ids, p.context_ids, p.targets).total.item()
            for p in dataset
        ]
        return float(np.mean(losses))

    def fit(self, train_examples: List[QAExample], dev_examples: Optional[List[QAExample]] = None,
            vocab: Optional[Vocabulary] = None, output_dir: Optional[Path] = None) -> TrainResult:
        if not train_examples:
            raise ConfigError("training needs a non-empty dataset")
        cfg = self.train_config
        vocab = vocab or Vocabulary.build(train_examples, self.model_config.encoder.vocab_size)
        train_set = prepare_dataset(train_examples, vocab, self.model_config.graph, training=True)
        # without a dev split the training examples are scored in eval mode
        dev_set = prepare_dataset(dev_examples or train_examples, vocab, self.model_config.graph)

        network = HierarchicalGraphNetwork(self.model_config, seed=cfg.seed)
        optimizer = Adam(network.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
        shuffle_rng = np.random.default_rng(cfg.seed)
        logger.info("training_started", examples=len(train_set), dev_examples=len(dev_set),
                    parameters=len(network.params), reasoning=self.model_config.gath.describe())

        rows: List[Dict[str, float]] = []
        best_dev = float("inf")
        best_state = network.params.state_dict()
        step = 0
        pool = ThreadPoolExecutor(max_workers=cfg.jobs) if cfg.jobs > 1 else None
        try:
            for epoch in range(1, cfg.epochs + 1):
                order = shuffle_rng.permutation(len(train_set))
                epoch_start = step
                batches = [order[i:i + cfg.batch_size] for i in range(0, len(order), cfg.batch_size)]
                for indices in tqdm(batches, desc=f"epoch {epoch}", disable=not cfg.progress):
                    step += 1
                    loss, grads = self.batch_gradients(
                        network, [train_set[i] for i in indices], step, pool
                    )
                    if not np.isfinite(loss):
                        logger.error("training_diverged", step=step, loss=loss)
                        raise TrainingDivergedError(step, loss)
                    optimizer.step(grads)
                    rows.append({"step": step, "train_loss": loss, "dev_loss": np.nan})
                    logger.debug("training_step", step=step, loss=loss)
                    if cfg.max_steps is not None and step >= cfg.max_steps:
                        break

                dev_loss = self.evaluate_loss(network, dev_set)
                rows[-1]["dev_loss"] = dev_loss
                epoch_losses = [row["train_loss"] for row in rows if row["step"] > epoch_start]
                logger.info("epoch_finished", epoch=epoch, step=step,
                            train_loss=float(np.mean(epoch_losses)), dev_loss=dev_loss)
                if dev_loss < best_dev:
                    best_dev = dev_loss
                    best_state = network.params.state_dict()
                if cfg.max_steps is not None and step >= cfg.max_steps:
                    break
        finally:
            if pool is not None:
                pool.shutdown()

        network.params.load_state_dict(best_state)
        curve = pd.DataFrame(rows, columns=["step", "train_loss", "dev_loss"])
        if output_dir is not None:
            write_loss_curve(curve, Path(output_dir) / LOSS_CURVE_FILE)
            CheckpointStore(Path(output_dir)).store(
                network, vocab, metadata={"best_dev_loss": best_dev, "steps": step}
            )
        logger.info("training_finished", steps=step, best_dev_loss=best_dev)
        return TrainResult(network=network, vocab=vocab, curve=curve, best_dev_loss=best_dev, steps=step)


def write_loss_curve(curve: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(path, index=False)
    return path


def train(train_examples: List[QAExample], train_config: Optional[TrainConfig] = None,
          model_config: Optional[ModelConfig] = None,
          dev_examples: Optional[List[QAExample]] = None,
          output_dir: Optional[Path] = None) -> TrainResult:
    return Trainer(model_config, train_config).fit(train_examples, dev_examples, output_dir=output_dir)
