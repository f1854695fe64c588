"""Command-line entry point: `python -m src.cli <command> [flags]`.

Exit codes: 0 success, 1 failed check (gradient tolerance, metric threshold,
training divergence), 2 usage or configuration error.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError

from src.autodiff.gradcheck import check_gradients
from src.autodiff.tensor import set_default_dtype
from src.common.config import settings
from src.common.errors import (
    CheckpointError,
    ConfigError,
    DataFormatError,
    HGQAError,
    TrainingDivergedError,
)
from src.common.logging import configure_logging, get_logger
from src.corpus.hotpot import load_any, write_dataset
from src.corpus.models import SynthConfig
from src.corpus.synthetic import generate_synthetic
from src.evaluation.ablation import ablate_orders
from src.evaluation.predictor import Predictor, read_predictions, write_predictions
from src.evaluation.scorer import score
from src.graph.builder import GraphBuilder
from src.graph.sampling import random_graph
from src.graph.selection import select_paragraphs
from src.model.config import ModelConfig, ReasoningMode
from src.model.heads import SPAN, Targets
from src.model.network import HierarchicalGraphNetwork
from src.storage.checkpoint import CheckpointStore
from src.storage.manifest import RunManifest, hash_inputs, write_manifest
from src.training.trainer import TrainConfig, Trainer

logger = get_logger(__name__)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2

TRAIN_KEYS = set(TrainConfig.__fields__)
MODEL_SECTIONS = {
    "encoder": {"vocab_size", "dropout_encoder", "use_bi_attention", "max_positions"},
    "gath": {"K", "mode", "level_order", "include_query_level", "dropout", "slope", "per_stage_params"},
    "heads": {"max_span", "support_threshold", "span_reads_sentence", "evidence_summary"},
    "graph": {"max_paragraphs", "qs_edges", "sentence_edges", "extract_entities", "max_entities"},
    "loss": {"lambda1", "lambda2", "lambda3", "lambda4"},
}


class UsageError(HGQAError):
    pass


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected 'on' or 'off', got {text!r}")
    return text == "on"


def existing_path(text: str) -> Path:
    path = settings.resolve_data_path(text)
    if not path.exists():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return path


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=existing_path, default=None,
                        help="key=value file of training/model settings")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None, help="worker threads; 0 = all cores")
    parser.add_argument("--precision", choices=["float64", "float32"], default=None)
    parser.add_argument("--log-level", default=None)
    parser.add_argument("--log-format", choices=["json", "console"], default=None)


def _add_training(parser: argparse.ArgumentParser, per_row_architecture: bool = False) -> None:
    parser.add_argument("--batch-size", dest="batch_size", type=positive_int, default=None)
    parser.add_argument("--lr", dest="learning_rate", type=float, default=None)
    parser.add_argument("--epochs", type=positive_int, default=None)
    parser.add_argument("--max-steps", dest="max_steps", type=positive_int, default=None)
    if not per_row_architecture:
        parser.add_argument("--mode", choices=[m.value for m in ReasoningMode], default=None)
        parser.add_argument("--order", dest="level_order", default=None,
                            help="level order, e.g. p,s,e or s,e,p; '+' joins levels in one stage")
    parser.add_argument("--qs-edges", dest="qs_edges", type=on_off, default=None)
    parser.add_argument("--include-query-level", dest="include_query_level",
                        action="store_true", default=None)
    parser.add_argument("--per-stage-params", dest="per_stage_params",
                        action="store_true", default=None)
    parser.add_argument("--d", type=positive_int, default=None, help="model width")
    parser.add_argument("--heads", dest="K", type=positive_int, default=None)
    parser.add_argument("--progress", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hgqa", description="Hierarchical graph QA toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-synth", help="write a synthetic multi-hop dataset")
    _add_common(gen)
    gen.add_argument("--n", type=positive_int, required=True)
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--vocab-size", type=positive_int, default=None)
    gen.add_argument("--entities", type=positive_int, default=None)
    gen.add_argument("--distractors", type=positive_int, default=None)
    gen.add_argument("--bridge-fraction", type=float, default=None)

    train = commands.add_parser("train", help="train a model and write a checkpoint")
    _add_common(train)
    _add_training(train)
    train.add_argument("--data", type=existing_path, required=True)
    train.add_argument("--dev", type=existing_path, default=None)
    train.add_argument("--out", type=Path, required=True, help="checkpoint directory")

    predict = commands.add_parser("predict", help="write an official-shape prediction file")
    _add_common(predict)
    predict.add_argument("--checkpoint", type=existing_path, required=True)
    predict.add_argument("--data", type=existing_path, required=True)
    predict.add_argument("--out", type=Path, required=True)

    evaluate = commands.add_parser("eval", help="score a prediction file against gold")
    _add_common(evaluate)
    evaluate.add_argument("--pred", type=existing_path, required=True)
    evaluate.add_argument("--gold", type=existing_path, required=True)
    evaluate.add_argument("--out", type=Path, default=None, help="JSON report path")
    evaluate.add_argument("--min-joint-f1", type=float, default=None)

    ablate = commands.add_parser("ablate", help="compare level orders and baselines")
    _add_common(ablate)
    # each ablation row fixes its own mode and level order
    _add_training(ablate, per_row_architecture=True)
    ablate.add_argument("--data", type=existing_path, required=True)
    ablate.add_argument("--dev", type=existing_path, default=None)
    ablate.add_argument("--orders", required=True, help="';'-separated orders, e.g. 'p,s,e;s,e,p'")
    ablate.add_argument("--baselines", action="store_true",
                        help="add GAT 1-layer, GAT 2-layer, QS-edge and combined rows")
    ablate.add_argument("--out", type=Path, default=None, help="report directory")

    gradcheck = commands.add_parser("gradcheck", help="finite-difference check of every parameter group")
    _add_common(gradcheck)
    gradcheck.add_argument("--mode", choices=[m.value for m in ReasoningMode], default="gath")
    gradcheck.add_argument("--order", dest="level_order", default="p,s,e")
    gradcheck.add_argument("--eps", type=float, default=1e-6)
    gradcheck.add_argument("--tolerance", type=float, default=1e-4)
    gradcheck.add_argument("--floor", type=float, default=1e-2,
                           help="smallest denominator of the relative error")
    gradcheck.add_argument("--points", type=positive_int, default=25)

    graph = commands.add_parser("build-graph", help="dump the hierarchical graph of one example")
    _add_common(graph)
    graph.add_argument("--data", type=existing_path, required=True)
    graph.add_argument("--index", type=int, default=0)
    graph.add_argument("--id", dest="example_id", default=None)
    graph.add_argument("--qs-edges", dest="qs_edges", type=on_off, default=None)
    graph.add_argument("--out", type=Path, default=None)
    return parser


def read_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    values = {key: value for key, value in dotenv_values(path).items() if value is not None}
    known = TRAIN_KEYS | {"d"} | set().union(*MODEL_SECTIONS.values())
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys: {', '.join(unknown)}")
    return values


def resolve_values(args: argparse.Namespace) -> Dict[str, Any]:
    """Defaults < config file < flags."""
    values = read_config_file(getattr(args, "config", None))
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config"):
            values[key] = value
    jobs = int(values.get("jobs", settings.HGQA_JOBS))
    values["jobs"] = jobs if jobs > 0 else settings.get_jobs()
    return values


def resolve_configs(values: Dict[str, Any]) -> Tuple[TrainConfig, ModelConfig]:
    train_values = {key: values[key] for key in TRAIN_KEYS if key in values}
    train_values.setdefault("seed", settings.HGQA_SEED)
    model_values: Dict[str, Dict[str, Any]] = {
        section: {key: values[key] for key in keys if key in values}
        for section, keys in MODEL_SECTIONS.items()
    }
    if "d" in values:
        model_values["encoder"]["d"] = values["d"]
        model_values["gath"]["d"] = values["d"]
    try:
        return TrainConfig(**train_values), ModelConfig.parse_obj(model_values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _manifest(command: str, directory: Path, config: Dict[str, Any], seed: int,
              inputs: Sequence[Optional[Path]]) -> None:
    manifest = RunManifest(command=command, config=config, seed=seed,
                           inputs=hash_inputs(p for p in inputs if p is not None))
    write_manifest(directory, manifest.finish())


def cmd_gen_synth(args: argparse.Namespace) -> int:
    values: Dict[str, Any] = {"num_examples": args.n, "seed": args.seed if args.seed is not None else settings.HGQA_SEED}
    for flag, field in (("vocab_size", "vocab_size"), ("entities", "num_entities"),
                        ("distractors", "distractor_count"), ("bridge_fraction", "bridge_fraction")):
        if getattr(args, flag) is not None:
            values[field] = getattr(args, flag)
    try:
        config = SynthConfig(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    args.out.parent.mkdir(parents=True, exist_ok=True)
    count = write_dataset(generate_synthetic(config), args.out)
    print(f"wrote {count} examples to {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    values = resolve_values(args)
    train_config, model_config = resolve_configs(values)
    train_examples = load_any(args.data)
    dev_examples = load_any(args.dev) if args.dev else None
    result = Trainer(model_config, train_config).fit(train_examples, dev_examples, output_dir=args.out)
    _manifest("train", args.out,
              {"train": json.loads(train_config.json()), "model": json.loads(model_config.json())},
              train_config.seed, [args.data, args.dev, args.config])
    print(f"best dev loss {result.best_dev_loss:.6f} after {result.steps} steps; checkpoint in {args.out}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    network, vocab = CheckpointStore(args.checkpoint).get()
    examples = load_any(args.data)
    jobs = resolve_values(args)["jobs"]
    predictions = Predictor(network, vocab, jobs).predict(examples)
    write_predictions(predictions, args.out)
    print(f"wrote predictions for {len(examples)} examples to {args.out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    report = score(read_predictions(args.pred), load_any(args.gold))
    print(report.to_text())
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(report.json(indent=2))
    if args.min_joint_f1 is not None and report.joint.f1 < args.min_joint_f1:
        logger.warning("metric_threshold_failed", joint_f1=report.joint.f1, threshold=args.min_joint_f1)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    values = resolve_values(args)
    orders = [order.strip() for order in args.orders.split(";") if order.strip()]
    if not orders:
        raise ConfigError("--orders lists no level order")
    fixed = [key for key in ("mode", "level_order") if key in values]
    if fixed:
        raise ConfigError(f"ablate sets {', '.join(fixed)} per row; remove it from the config file")
    train_config, model_config = resolve_configs(values)
    # every order must parse before any training starts
    for order in orders:
        resolve_configs({**values, "level_order": order})
    train_examples = load_any(args.data)
    dev_examples = load_any(args.dev) if args.dev else None
    report = ablate_orders(train_examples, orders, train_config, dev_examples, model_config,
                           baselines=args.baselines)
    print(report.to_text())
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "ablation.json").write_text(report.json(indent=2))
        (args.out / "ablation.txt").write_text(report.to_text() + "\n")
        _manifest("ablate", args.out,
                  {"orders": orders, "baselines": args.baselines,
                   "train": json.loads(train_config.json()), "model": json.loads(model_config.json())},
                  train_config.seed, [args.data, args.dev, args.config])
    return EXIT_OK


def gradcheck_setup(seed: int, mode: str = "gath", level_order: str = "p,s,e"):
    """Small network, random graph (n_p=2, n_s=5, n_e=4) and a pure loss closure."""
    rng = np.random.default_rng(seed)
    config = ModelConfig.parse_obj({
        "encoder": {"vocab_size": 40, "d": 8, "max_positions": 64},
        "gath": {"K": 2, "d": 8, "mode": mode, "level_order": level_order},
    })
    network = HierarchicalGraphNetwork(config, seed=seed)
    graph = random_graph(rng, n_p=2, n_s=5, n_e=4)
    question_ids = rng.integers(0, 40, size=len(graph.question_tokens))
    context_ids = rng.integers(0, 40, size=len(graph.context_tokens))
    n = len(graph.context_tokens)
    start = int(rng.integers(0, n - 1))
    targets = Targets(
        para=np.array([1.0, 0.0]),
        sent=(rng.random(graph.n_s) < 0.5).astype(float),
        answer_type=SPAN, start=start, end=start + 1, entity=int(rng.integers(0, graph.n_e)),
    )

    def loss_fn():
        return network.loss(graph, question_ids, context_ids, targets).total

    return network, loss_fn


def cmd_gradcheck(args: argparse.Namespace) -> int:
    set_default_dtype(np.float64)
    seed = args.seed if args.seed is not None else settings.HGQA_SEED
    try:
        network, loss_fn = gradcheck_setup(seed, args.mode, args.level_order)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    report = check_gradients(loss_fn, network.params.groups(), eps=args.eps,
                             tolerance=args.tolerance, points_per_tensor=args.points, seed=seed,
                             floor=args.floor)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_build_graph(args: argparse.Namespace) -> int:
    values = resolve_values(args)
    _, model_config = resolve_configs(values)
    examples = load_any(args.data)
    if args.example_id is not None:
        matches = [ex for ex in examples if ex.id == args.example_id]
        if not matches:
            raise UsageError(f"no example with id {args.example_id}")
        example = matches[0]
    else:
        if not 0 <= args.index < len(examples):
            raise UsageError(f"--index {args.index} outside dataset of {len(examples)} examples")
        example = examples[args.index]
    selected = select_paragraphs(example, model_config.graph.max_paragraphs)
    graph = GraphBuilder(model_config.graph).build(example, selected)
    payload = {"id": example.id, **graph.to_dict(), "edge_counts": graph.edge_counts()}
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        print(text)
    return EXIT_OK


COMMANDS = {
    "gen-synth": cmd_gen_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "gradcheck": cmd_gradcheck,
    "build-graph": cmd_build_graph,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK

    configure_logging(args.log_level, args.log_format)
    try:
        set_default_dtype(args.precision or settings.get_precision_dtype())
        return COMMANDS[args.command](args)
    except (ConfigError, DataFormatError, CheckpointError, UsageError) as exc:
        logger.error("usage_error", command=args.command, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except ValueError as exc:
        logger.error("usage_error", command=args.command, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
