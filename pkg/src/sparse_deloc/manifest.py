"""Run manifests and flat key-value config files."""

from __future__ import annotations

import datetime as _dt
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    tool_version: str = __version__
    started: str = ""
    finished: str = ""
    output_paths: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "started": self.started,
            "finished": self.finished,
            "output_paths": self.output_paths,
        }

    @classmethod
    def load(cls, path) -> "RunManifest":
        raw = json.loads(Path(path).read_text())
        return cls(**raw)


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(path, manifest: RunManifest) -> None:
    atomic_write_text(path, json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n")


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Values stay strings
    except that the argparse layer converts them with each option's type."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out
