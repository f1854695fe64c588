import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from pydantic import BaseModel, Field

from src.common.errors import CheckpointError

MANIFEST_FILE = "manifest.json"


class RunManifest(BaseModel):
    command: str
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: int
    inputs: Dict[str, str] = Field(default_factory=dict)
    started_at: datetime = Field(default_factory=datetime.utcnow)
    finished_at: Optional[datetime] = None

    def finish(self) -> "RunManifest":
        self.finished_at = datetime.utcnow()
        return self


def content_hash(path: Path) -> str:
    """sha256 of a file's bytes, prefixed with the algorithm name."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return f"sha256:{digest.hexdigest()}"


def hash_inputs(paths: Iterable[Path]) -> Dict[str, str]:
    return {str(path): content_hash(Path(path)) for path in paths}


def write_manifest(directory: Path, manifest: RunManifest) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_FILE
    path.write_text(manifest.json(indent=2, sort_keys=True))
    return path


def read_manifest(directory: Path) -> RunManifest:
    path = Path(directory) / MANIFEST_FILE
    if not path.exists():
        raise CheckpointError(f"Run directory {directory}: missing required file: {MANIFEST_FILE}")
    return RunManifest.parse_obj(json.loads(path.read_text()))
