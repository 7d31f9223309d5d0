"""Run manifests: what ran, with which inputs, producing which outputs.

The manifest pins the command, the configuration digest, the seed and
content digests of every input and output file. Re-running a command
with the same configuration and seed reproduces the outputs byte for
byte; the only volatile manifest field is ``created_at``.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__


def file_digest(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def build_manifest(
    command: str,
    seed: int,
    config_path=None,
    inputs: dict | None = None,
    outputs: dict | None = None,
    settings: dict | None = None,
) -> dict:
    manifest = {
        "command": command,
        "seed": seed,
        "config_digest": file_digest(config_path) if config_path else None,
        "settings": settings or {},
        "inputs": {str(k): file_digest(v) for k, v in (inputs or {}).items()},
        "outputs": {str(k): file_digest(v) for k, v in (outputs or {}).items()},
        "version": __version__,
    }
    manifest["digest"] = manifest_digest(manifest)
    manifest["created_at"] = datetime.now(timezone.utc).isoformat()
    return manifest


def manifest_digest(manifest: dict) -> str:
    """Digest of the reproducible manifest core (no timestamp)."""
    core = {k: v for k, v in manifest.items() if k not in ("created_at", "digest")}
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()


def write_manifest(manifest: dict, path):
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
