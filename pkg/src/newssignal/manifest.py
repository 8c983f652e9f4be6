"""Run manifests: digests of every input and output plus the effective
configuration, written next to each command's artifact. Re-running a command
with unchanged manifest inputs must reproduce identical output digests."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command: str, inputs: dict, config: dict, outputs: dict) -> None:
    """`inputs`/`outputs` map logical names to file paths."""
    doc = {
        "tool": "newssignal",
        "version": __version__,
        "command": command,
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)} for name, p in inputs.items()},
        "config": config,
        "outputs": {name: {"path": str(p), "sha256": sha256_file(p)} for name, p in outputs.items()},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def manifest_path(artifact_path) -> Path:
    artifact_path = Path(artifact_path)
    return artifact_path.with_name(artifact_path.name + ".manifest.json")
