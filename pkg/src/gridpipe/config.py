"""Server configuration file handling.

Config files are JSON: {"bindHost": str, "port": int, "backends": [...],
"modules": [manifest paths]}. Backend entries follow the registry schema;
module paths resolve relative to the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestSyntaxError, SchemaError

_CONFIG_KEYS = {"bindHost", "port", "backends", "modules"}


@dataclass(frozen=True)
class ServerConfig:
    bind_host: str
    port: int
    backends: tuple
    modules: tuple = ()


def load_server_config(path) -> ServerConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestSyntaxError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestSyntaxError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("(root)", "config must be a JSON object")

    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown config key")

    bind_host = doc.get("bindHost", "127.0.0.1")
    if not isinstance(bind_host, str) or not bind_host:
        raise SchemaError("bindHost", "must be a non-empty string")

    port = doc.get("port")
    if isinstance(port, bool) or not isinstance(port, int) or not 1 <= port <= 65535:
        raise SchemaError("port", "must be an integer in 1..65535")

    backends = doc.get("backends")
    if not isinstance(backends, list) or not backends:
        raise SchemaError("backends", "must be a non-empty array")
    for i, entry in enumerate(backends):
        if not isinstance(entry, dict) or "type" not in entry:
            raise SchemaError(f"backends[{i}]", "must be an object with a type key")

    modules = doc.get("modules", [])
    if not isinstance(modules, list):
        raise SchemaError("modules", "must be an array of manifest paths")
    resolved = []
    for i, entry in enumerate(modules):
        if not isinstance(entry, str) or not entry:
            raise SchemaError(f"modules[{i}]", "must be a non-empty path string")
        resolved.append(str((path.parent / entry).resolve()))

    return ServerConfig(
        bind_host=bind_host,
        port=port,
        backends=tuple(backends),
        modules=tuple(resolved),
    )
