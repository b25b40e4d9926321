import logging
import os
import subprocess
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import torch
from pydantic import BaseModel, Field

from pg2 import __version__

logger = logging.getLogger(__name__)

# argv of the command being served; set once by the entry point
_command: List[str] = []


def record_command(argv: Sequence[str]) -> None:
    _command[:] = list(argv)


def current_command() -> List[str]:
    return list(_command) if _command else sys.argv[1:]


def _now() -> datetime:
    return datetime.now(timezone.utc)


def _git_commit() -> Optional[str]:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    if out.returncode != 0:
        return None
    return out.stdout.strip() or None


class RunManifest(BaseModel):
    """Provenance written next to every run's checkpoints and reports.

    command is the argv after the program name; with config and seed it is
    enough to run the command again. outputs are relative to the manifest's
    directory.
    """

    kind: str
    status: str = "running"
    command: List[str] = Field(default_factory=current_command)
    seed: Optional[int] = None
    config: Optional[Dict[str, Any]] = None
    config_hash: Optional[str] = None
    g1_hash: Optional[str] = None
    iteration: int = 0
    checkpoint: Optional[str] = None
    outputs: List[str] = Field(default_factory=list)
    created_at: datetime = Field(default_factory=_now)
    updated_at: datetime = Field(default_factory=_now)
    duration_s: Optional[float] = None
    package_version: str = __version__
    torch_version: str = Field(default_factory=lambda: torch.__version__)
    git_commit: Optional[str] = Field(default_factory=_git_commit)
    extra: Dict[str, Any] = Field(default_factory=dict)

    def finish(self, run_dir: Union[str, Path], outputs: Sequence[str] = (), status: str = "complete") -> Path:
        self.status = status
        self.outputs = sorted(set(self.outputs) | set(outputs))
        self.duration_s = (_now() - self.created_at).total_seconds()
        return self.write(run_dir)

    def write(self, run_dir: Union[str, Path]) -> Path:
        path = Path(run_dir) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        self.updated_at = _now()
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(self.model_dump_json(indent=2))
        os.replace(tmp, path)
        return path

    @classmethod
    def read(cls, run_dir: Union[str, Path]) -> "RunManifest":
        return cls.model_validate_json((Path(run_dir) / "manifest.json").read_text())
