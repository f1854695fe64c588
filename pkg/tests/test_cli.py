import json
from unittest.mock import patch

import pandas as pd
import pytest

from src.cli.main import (
    EXIT_CHECK_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    build_parser,
    main,
    read_config_file,
    resolve_configs,
    resolve_values,
)
from src.common.errors import ConfigError
from src.corpus.hotpot import read_dataset, write_dataset
from src.evaluation.ablation import AblationReport, AblationRow, plan_runs
from src.evaluation.predictor import write_predictions
from src.evaluation.scorer import MetricBlock, MetricsReport, Predictions
from src.model.config import ReasoningMode
from src.storage.manifest import read_manifest
from src.training.trainer import TrainResult


@pytest.fixture
def dataset_path(tmp_path, small_examples):
    path = tmp_path / "train.ndjson"
    write_dataset(small_examples, path)
    return path


@pytest.fixture
def mock_trainer(mocker):
    mock_cls = mocker.patch("src.cli.main.Trainer")
    mock_cls.return_value.fit.return_value = TrainResult(
        network=None, vocab=None, curve=pd.DataFrame(), best_dev_loss=1.5, steps=3
    )
    return mock_cls


def test_writes_requested_examples(tmp_path, capsys):
    # Arrange
    out = tmp_path / "synth.ndjson"

    # Act
    code = main(["gen-synth", "--n", "5", "--out", str(out), "--seed", "3", "--entities", "20",
                 "--distractors", "2", "--vocab-size", "300"])

    # Assert
    assert code == EXIT_OK
    assert len(read_dataset(out)) == 5
    assert "wrote 5 examples" in capsys.readouterr().out

def test_output_is_byte_stable(tmp_path):
    # Arrange
    first, second = tmp_path / "a.ndjson", tmp_path / "b.ndjson"
    flags = ["--n", "4", "--seed", "9", "--entities", "20", "--distractors", "2", "--vocab-size", "300"]

    # Act
    main(["gen-synth", "--out", str(first)] + flags)
    main(["gen-synth", "--out", str(second)] + flags)

    # Assert
    assert first.read_bytes() == second.read_bytes()

def test_zero_examples_is_a_usage_error(tmp_path):
    assert main(["gen-synth", "--n", "0", "--out", str(tmp_path / "x.ndjson")]) == EXIT_USAGE

def test_too_small_vocabulary_is_a_usage_error(tmp_path):
    code = main(["gen-synth", "--n", "2", "--out", str(tmp_path / "x.ndjson"), "--vocab-size", "10"])
    assert code == EXIT_USAGE


def test_missing_dataset(tmp_path):
    code = main(["train", "--data", str(tmp_path / "absent.ndjson"), "--out", str(tmp_path / "ckpt")])
    assert code == EXIT_USAGE

def test_invalid_order(dataset_path, tmp_path, mock_trainer):
    # Act
    code = main(["train", "--data", str(dataset_path), "--out", str(tmp_path / "ckpt"),
                 "--order", "p,x,e"])

    # Assert
    assert code == EXIT_USAGE
    mock_trainer.assert_not_called()

def test_flags_reach_configs(dataset_path, tmp_path, mock_trainer):
    # Act
    code = main(["train", "--data", str(dataset_path), "--out", str(tmp_path / "ckpt"),
                 "--mode", "gath", "--order", "s,e,p", "--qs-edges", "off", "--d", "8",
                 "--heads", "2", "--epochs", "2", "--seed", "5", "--jobs", "1"])

    # Assert
    assert code == EXIT_OK
    model_config, train_config = mock_trainer.call_args.args
    assert model_config.gath.describe() == "GATH(S/E/P)"
    assert model_config.graph.qs_edges is False
    assert model_config.encoder.d == model_config.gath.d == 8
    assert (train_config.epochs, train_config.seed, train_config.jobs) == (2, 5, 1)
    manifest = read_manifest(tmp_path / "ckpt")
    assert manifest.command == "train"
    assert str(dataset_path) in manifest.inputs

def test_divergence_exits_with_check_failure(dataset_path, tmp_path, mock_trainer):
    # Arrange
    from src.common.errors import TrainingDivergedError
    mock_trainer.return_value.fit.side_effect = TrainingDivergedError(4, float("nan"))

    # Act
    code = main(["train", "--data", str(dataset_path), "--out", str(tmp_path / "ckpt")])

    # Assert
    assert code == EXIT_CHECK_FAILED


def test_file_then_flags(tmp_path):
    # Arrange
    config = tmp_path / "run.env"
    config.write_text("epochs=4\nlevel_order=e,s,p\nlambda2=3.0\nbatch_size=8\n")
    args = build_parser().parse_args(["train", "--data", str(config), "--out", str(tmp_path),
                                      "--config", str(config), "--batch-size", "2", "--jobs", "1"])

    # Act
    train_config, model_config = resolve_configs(resolve_values(args))

    # Assert
    assert train_config.epochs == 4
    assert train_config.batch_size == 2
    assert model_config.gath.describe() == "GATH(E/S/P)"
    assert model_config.loss.lambda2 == 3.0

def test_unknown_key_in_file(tmp_path):
    # Arrange
    config = tmp_path / "run.env"
    config.write_text("learning_rat=0.1\n")

    # Act / Assert
    with pytest.raises(ConfigError, match="unknown keys: learning_rat"):
        read_config_file(config)

def test_mode_flag():
    # Act
    _, model_config = resolve_configs({"mode": "gat2", "jobs": 1})

    # Assert
    assert model_config.gath.mode == ReasoningMode.GAT_2LAYER


@pytest.fixture
def gold_path(tmp_path, skiffle_example):
    path = tmp_path / "gold.ndjson"
    write_dataset([skiffle_example], path)
    return path

def test_perfect_predictions(tmp_path, gold_path, capsys):
    # Arrange
    pred = write_predictions(Predictions(
        answer={"skiffle": "the United States"},
        sp={"skiffle": [("Die Rhöner Säuwäntzt", 0), ("Skiffle", 1)]},
    ), tmp_path / "pred.json")
    out = tmp_path / "report.json"

    # Act
    code = main(["eval", "--pred", str(pred), "--gold", str(gold_path), "--out", str(out)])

    # Assert
    assert code == EXIT_OK
    report = json.loads(out.read_text())
    for block in ("answer", "support", "joint"):
        assert report[block] == {"em": 1.0, "f1": 1.0, "precision": 1.0, "recall": 1.0}
    assert "Joint" in capsys.readouterr().out

def test_threshold_failure(tmp_path, gold_path):
    # Arrange
    pred = write_predictions(Predictions(answer={"skiffle": "Germany"}, sp={"skiffle": []}),
                             tmp_path / "pred.json")

    # Act
    code = main(["eval", "--pred", str(pred), "--gold", str(gold_path), "--min-joint-f1", "0.5"])

    # Assert
    assert code == EXIT_CHECK_FAILED

def test_malformed_prediction_file(tmp_path, gold_path):
    # Arrange
    pred = tmp_path / "pred.json"
    pred.write_text(json.dumps({"answer": {}}))

    # Act / Assert
    assert main(["eval", "--pred", str(pred), "--gold", str(gold_path)]) == EXIT_USAGE


def test_report_has_one_row_per_order(dataset_path, tmp_path, capsys):
    # Arrange
    block = MetricBlock(em=0.5, f1=0.5, precision=0.5, recall=0.5)
    report = AblationReport(rows=[
        AblationRow(name=name, report=MetricsReport(count=1, answer=block, support=block, joint=block))
        for name in ("GATH(P/S/E)", "GATH(S/E/P)")
    ])
    out = tmp_path / "ablation"

    # Act
    with patch("src.cli.main.ablate_orders", return_value=report) as mock_ablate:
        code = main(["ablate", "--data", str(dataset_path), "--orders", "p,s,e;s,e,p",
                     "--out", str(out), "--jobs", "1"])

    # Assert
    assert code == EXIT_OK
    assert mock_ablate.call_args.args[1] == ["p,s,e", "s,e,p"]
    saved = json.loads((out / "ablation.json").read_text())
    assert [row["name"] for row in saved["rows"]] == ["GATH(P/S/E)", "GATH(S/E/P)"]
    assert read_manifest(out).config["orders"] == ["p,s,e", "s,e,p"]
    assert "GATH(S/E/P)" in capsys.readouterr().out

def test_bad_order_fails_before_training(dataset_path):
    # Act
    with patch("src.cli.main.ablate_orders") as mock_ablate:
        code = main(["ablate", "--data", str(dataset_path), "--orders", "p,s,e;p,s"])

    # Assert
    assert code == EXIT_USAGE
    mock_ablate.assert_not_called()

def test_ablate_carries_question_sentence_edges_to_order_rows(dataset_path):
    # Act
    with patch("src.cli.main.ablate_orders") as mock_ablate:
        block = MetricBlock(em=0.5, f1=0.5, precision=0.5, recall=0.5)
        mock_ablate.return_value = AblationReport(rows=[
            AblationRow(name="GATH(S/E/P)", report=MetricsReport(count=1, answer=block, support=block, joint=block))
        ])
        code = main(["ablate", "--data", str(dataset_path), "--orders", "s,e,p", "--qs-edges", "on",
                     "--jobs", "1"])

    # Assert
    assert code == EXIT_OK
    base = mock_ablate.call_args.args[4]
    assert base.graph.qs_edges is True
    assert plan_runs(["s,e,p"])[0].model_config(base).graph.qs_edges is True

def test_ablate_rejects_mode_flag(dataset_path):
    # Act
    with patch("src.cli.main.ablate_orders") as mock_ablate:
        code = main(["ablate", "--data", str(dataset_path), "--orders", "s,e,p", "--mode", "gat1"])

    # Assert
    assert code == EXIT_USAGE
    mock_ablate.assert_not_called()

def test_ablate_rejects_mode_in_config_file(dataset_path, tmp_path):
    # Arrange
    config = tmp_path / "run.env"
    config.write_text("mode=gat2\n")

    # Act
    with patch("src.cli.main.ablate_orders") as mock_ablate:
        code = main(["ablate", "--data", str(dataset_path), "--orders", "s,e,p", "--config", str(config)])

    # Assert
    assert code == EXIT_USAGE
    mock_ablate.assert_not_called()


def test_passes_on_small_network(capsys):
    # Act
    code = main(["gradcheck", "--points", "3", "--seed", "2"])

    # Assert
    lines = capsys.readouterr().out.splitlines()
    assert code == EXIT_OK
    assert lines and all(line.startswith("PASS rel_err<0.0001") for line in lines)

def test_impossible_tolerance_fails():
    assert main(["gradcheck", "--points", "2", "--tolerance", "0"]) == EXIT_CHECK_FAILED


def test_dumps_graph_json(tmp_path, skiffle_example):
    # Arrange
    data = tmp_path / "one.ndjson"
    write_dataset([skiffle_example], data)
    out = tmp_path / "graph.json"

    # Act
    code = main(["build-graph", "--data", str(data), "--id", "skiffle", "--out", str(out)])

    # Assert
    payload = json.loads(out.read_text())
    assert code == EXIT_OK
    assert payload["counts"]["n_s"] == 3
    assert payload["edge_counts"]["P2S_HYPER"] == 1

def test_unknown_id(tmp_path, skiffle_example):
    # Arrange
    data = tmp_path / "one.ndjson"
    write_dataset([skiffle_example], data)

    # Act / Assert
    assert main(["build-graph", "--data", str(data), "--id", "nope"]) == EXIT_USAGE


@pytest.mark.slow
def test_train_predict_eval(dataset_path, tmp_path):
    # Arrange
    checkpoint = tmp_path / "ckpt"
    pred = tmp_path / "pred.json"

    # Act
    trained = main(["train", "--data", str(dataset_path), "--out", str(checkpoint), "--epochs", "2",
                    "--batch-size", "4", "--d", "8", "--heads", "2", "--jobs", "1"])
    predicted = main(["predict", "--checkpoint", str(checkpoint), "--data", str(dataset_path),
                      "--out", str(pred), "--jobs", "1"])
    evaluated = main(["eval", "--pred", str(pred), "--gold", str(dataset_path)])

    # Assert
    assert (trained, predicted, evaluated) == (EXIT_OK, EXIT_OK, EXIT_OK)
    assert (checkpoint / "manifest.json").exists()
