"""Run manifests: every CLI command records what ran, on what, and how it ended."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path as FsPath

from . import __version__


@dataclass
class RunManifest:
    command: str
    config_hash: str
    base_seed: int
    artifact_paths: list[str] = field(default_factory=list)
    wall_clock_s: float = 0.0
    version: str = __version__
    status: str = "running"

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "base_seed": self.base_seed,
            "artifact_paths": sorted(self.artifact_paths),
            "wall_clock_s": self.wall_clock_s,
            "version": self.version,
            "status": self.status,
        }

    def write(self, out_dir: FsPath | str) -> FsPath:
        out_dir = FsPath(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")
        return path


class ManifestTimer:
    """Writes a running manifest up front and finalizes it on exit.

    A crash between start and finish leaves status="failed" on disk.
    """

    def __init__(self, manifest: RunManifest, out_dir: FsPath | str):
        self.manifest = manifest
        self.out_dir = FsPath(out_dir)
        self._t0 = None

    def __enter__(self) -> RunManifest:
        self._t0 = time.monotonic()
        self.manifest.status = "running"
        self.manifest.write(self.out_dir)
        return self.manifest

    def __exit__(self, exc_type, exc, tb) -> bool:
        self.manifest.wall_clock_s = round(time.monotonic() - self._t0, 3)
        self.manifest.status = "failed" if exc_type else "ok"
        self.manifest.write(self.out_dir)
        return False
