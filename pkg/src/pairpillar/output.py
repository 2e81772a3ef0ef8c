"""Delimited-text writers and the reproducibility manifest.

Numeric outputs carry 17 significant digits so repeated runs are
byte-identical and usable as golden files.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def write_columns(path, names, columns) -> None:
    """Tab-separated columns with a '#'-prefixed header naming each column."""
    columns = [list(c) for c in columns]
    with open(path, "w") as fh:
        fh.write("# " + "\t".join(names) + "\n")
        for row in zip(*columns):
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def write_keyvalues(path, mapping) -> None:
    with open(path, "w") as fh:
        for key, value in mapping.items():
            fh.write(f"{key} = {_fmt(value)}\n")


def sha256_of_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_sha256: str
    seed: int
    toolkit_version: str
    wall_time_s: float
    outputs: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def write(self, directory) -> Path:
        """Atomic write: the manifest appears only after a successful run."""
        path = Path(directory) / "manifest.json"
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        return path


class OutputSession:
    """Tracks files written by one command so failures leave nothing behind."""

    def __init__(self, directory, command: str, config_path, seed: int, version: str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config_sha = sha256_of_file(config_path)
        self.seed = seed
        self.version = version
        self.created: list[Path] = []
        self.extra: dict = {}
        self._t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        p = self.directory / name
        self.created.append(p)
        return p

    def finalize(self) -> Path:
        manifest = RunManifest(
            command=self.command,
            config_sha256=self.config_sha,
            seed=self.seed,
            toolkit_version=self.version,
            wall_time_s=time.perf_counter() - self._t0,
            outputs=[p.name for p in self.created],
            extra=self.extra,
        )
        return manifest.write(self.directory)

    def abort(self) -> None:
        for p in self.created:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass
