"""Checkpoint directories: named parameter arrays, vocabulary and model config.

Layout of a checkpoint directory:
    params.npz   one array per parameter name plus `__format_version__`
    vocab.json   token list, id order
    config.json  ModelConfig
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from src.common.errors import CheckpointError
from src.common.logging import get_logger
from src.corpus.vocab import Vocabulary
from src.model.config import ModelConfig
from src.model.network import HierarchicalGraphNetwork

logger = get_logger(__name__)

FORMAT_VERSION = 1
VERSION_KEY = "__format_version__"
PARAMS_FILE = "params.npz"
VOCAB_FILE = "vocab.json"
CONFIG_FILE = "config.json"


class CheckpointStore:
    def __init__(self, directory: Path):
        self.directory = Path(directory)

    def store(self, network: HierarchicalGraphNetwork, vocab: Vocabulary,
              metadata: Optional[Dict[str, Any]] = None) -> Path:
        """Write the network parameters, vocabulary and config."""
        self.directory.mkdir(parents=True, exist_ok=True)
        arrays = network.params.state_dict()
        if VERSION_KEY in arrays:
            raise CheckpointError(f"Parameter name collides with {VERSION_KEY}")
        arrays[VERSION_KEY] = np.array(FORMAT_VERSION)
        with open(self.directory / PARAMS_FILE, "wb") as handle:
            np.savez(handle, **arrays)
        (self.directory / VOCAB_FILE).write_text(json.dumps(vocab.to_list(), ensure_ascii=False))
        config = json.loads(network.config.json())
        if metadata:
            config["metadata"] = metadata
        (self.directory / CONFIG_FILE).write_text(json.dumps(config, indent=2, sort_keys=True))
        logger.info("checkpoint_saved", path=str(self.directory), parameters=len(network.params))
        return self.directory

    def get(self) -> Tuple[HierarchicalGraphNetwork, Vocabulary]:
        """Rebuild the network and vocabulary stored in the directory."""
        for name in (PARAMS_FILE, VOCAB_FILE, CONFIG_FILE):
            if not (self.directory / name).exists():
                raise CheckpointError(f"Checkpoint {self.directory}: missing required file: {name}")

        raw = json.loads((self.directory / CONFIG_FILE).read_text())
        raw.pop("metadata", None)
        try:
            config = ModelConfig.parse_obj(raw)
        except ValidationError as exc:
            raise CheckpointError(f"Checkpoint {self.directory}: invalid config: {exc}") from exc
        vocab = Vocabulary(json.loads((self.directory / VOCAB_FILE).read_text()))

        with np.load(self.directory / PARAMS_FILE) as archive:
            state = {key: archive[key] for key in archive.files}
        version = int(state.pop(VERSION_KEY, -1))
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"Checkpoint {self.directory}: format version {version}, expected {FORMAT_VERSION}"
            )
        network = HierarchicalGraphNetwork(config)
        try:
            network.params.load_state_dict(state)
        except (KeyError, ValueError) as exc:
            raise CheckpointError(f"Checkpoint {self.directory}: {exc}") from exc
        logger.info("checkpoint_loaded", path=str(self.directory))
        return network, vocab

    def get_metadata(self) -> Dict[str, Any]:
        path = self.directory / CONFIG_FILE
        if not path.exists():
            return {}
        return json.loads(path.read_text()).get("metadata", {})
