"""Reproducible run manifests: config, input digests and artifact digests."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Dict, Mapping, Optional

from . import __version__
from .config import RunConfig, config_items
from .paths import OutputPaths

_CHUNK = 1 << 20


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(_CHUNK), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(
    config: RunConfig,
    inputs: Mapping[str, Optional[Path]],
    outputs: OutputPaths,
) -> Dict[str, object]:
    """Manifest for the artifacts currently in ``outputs``.

    Artifacts are keyed by file name, so a manifest built in the staging
    directory stays valid after the files are published.
    """
    manifest_name = outputs.manifest_file.name
    return {
        "version": __version__,
        "config": dict(config_items(config)),
        "inputs": {
            name: {"path": path.name, "sha256": file_digest(path)}
            for name, path in sorted(inputs.items())
            if path is not None
        },
        "artifacts": {
            path.name: file_digest(path)
            for path in outputs.artifacts()
            if path.name != manifest_name
        },
    }


def write_manifest(
    config: RunConfig,
    inputs: Mapping[str, Optional[Path]],
    outputs: OutputPaths,
) -> Dict[str, object]:
    manifest = build_manifest(config, inputs, outputs)
    outputs.manifest_file.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
