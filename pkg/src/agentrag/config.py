"""INI-style run configuration.

Sections mirror the modules::

    [orchestrator]   every EngineConfig field
    [llm_backend]    backend = remote | scripted:<file> | replay:<cassette>, url, record, max_in_flight
    [retrieval]      index, embedder = test[:<dim>] | lookup:<file> | remote, embed_url, embed_model,
                     chunk_words, overlap_words
    [cli]            timing = auto | wall | off, transcript_dir

Relative paths are resolved against the directory holding the file.
Precedence is command-line flag > config file > built-in default.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .llm import API_KEY_ENV, ChatBackend, RecordingBackend, RemoteChatBackend, ReplayBackend, ScriptedBackend
from .orchestrator import EngineConfig
from .retrieval import Embedder, HashEmbedder, LookupEmbedder, RemoteEmbedder

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class CliConfig:
    engine: EngineConfig = EngineConfig()
    backend: str = "remote"
    url: str = "http://localhost:8000"
    record: str | None = None
    max_in_flight: int = 8
    index: str | None = None
    embedder: str = "test"
    embed_url: str | None = None
    embed_model: str = "default"
    chunk_words: int = 100
    overlap_words: int = 0
    timing: str = "auto"
    transcript_dir: str = "transcripts"

    def __post_init__(self):
        kind = self.backend.split(":", 1)[0]
        if kind not in ("remote", "scripted", "replay"):
            raise ConfigError(f"backend must be remote, scripted:<file> or replay:<cassette>, got {self.backend!r}")
        if kind != "remote" and ":" not in self.backend:
            raise ConfigError(f"backend {self.backend!r} needs a file, e.g. {kind}:path")
        ekind = self.embedder.split(":", 1)[0]
        if ekind not in ("test", "lookup", "remote"):
            raise ConfigError(f"embedder must be test, lookup:<file> or remote, got {self.embedder!r}")
        if self.timing not in ("auto", "wall", "off"):
            raise ConfigError("timing must be auto, wall or off")

    @property
    def deterministic(self) -> bool:
        if self.timing == "auto":
            return self.backend.split(":", 1)[0] in ("scripted", "replay")
        return self.timing == "off"


_SECTIONS = {
    "llm_backend": ("backend", "url", "record", "max_in_flight"),
    "retrieval": ("index", "embedder", "embed_url", "embed_model", "chunk_words", "overlap_words"),
    "cli": ("timing", "transcript_dir"),
}
_PATH_KEYS = {"record", "index", "transcript_dir"}
_PATH_PREFIXED = {"backend": ("scripted", "replay"), "embedder": ("lookup",)}


def _convert(value: str, like: Any, key: str) -> Any:
    if isinstance(like, bool):
        low = value.strip().lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    return value


def _optional_int(value: str, key: str) -> int | None:
    if not value.strip() or value.strip().lower() == "none":
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def resolve_path(value: str, base: Path) -> str:
    p = Path(value).expanduser()
    return str(p if p.is_absolute() else (base / p).resolve())


def _resolve_prefixed(value: str, prefixes: tuple[str, ...], base: Path) -> str:
    kind, _, rest = value.partition(":")
    if kind in prefixes and rest:
        return f"{kind}:{resolve_path(rest, base)}"
    return value


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Flatten a config file into CliConfig/EngineConfig field overrides."""
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    base = path.resolve().parent
    out: dict[str, Any] = {}
    defaults = EngineConfig()
    cli_defaults = CliConfig()
    known = {"orchestrator": EngineConfig.field_names(), **{k: list(v) for k, v in _SECTIONS.items()}}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in known[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            if section == "orchestrator":
                if key == "rating_threshold":
                    out[key] = _optional_int(raw, key)
                else:
                    out[key] = _convert(raw, getattr(defaults, key), key)
            elif key in _PATH_KEYS:
                out[key] = resolve_path(raw, base) if raw.strip() else None
            elif key in _PATH_PREFIXED:
                out[key] = _resolve_prefixed(raw.strip(), _PATH_PREFIXED[key], base)
            elif key == "embed_url":
                out[key] = raw or None
            else:
                out[key] = _convert(raw, getattr(cli_defaults, key), key)
    return out


def merge(file_values: dict[str, Any], flag_values: dict[str, Any]) -> CliConfig:
    """Defaults, then file values, then flags (entries that are None are unset)."""
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    engine_names = set(EngineConfig.field_names())
    cli_names = {f.name for f in fields(CliConfig)} - {"engine"}
    unknown = set(merged) - engine_names - cli_names
    if unknown:
        raise ConfigError(f"unknown settings: {sorted(unknown)}")
    try:
        engine = replace(EngineConfig(), **{k: v for k, v in merged.items() if k in engine_names})
        return CliConfig(engine=engine, **{k: v for k, v in merged.items() if k in cli_names})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def make_backend(cfg: CliConfig) -> ChatBackend:
    kind, _, arg = cfg.backend.partition(":")
    try:
        if kind == "scripted":
            backend: ChatBackend = ScriptedBackend.from_file(arg)
        elif kind == "replay":
            backend = ReplayBackend.from_file(arg)
        else:
            backend = RemoteChatBackend(cfg.url, os.environ.get(API_KEY_ENV), max_in_flight=cfg.max_in_flight)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load backend {cfg.backend!r}: {exc}") from None
    if cfg.record:
        backend = RecordingBackend(backend, cfg.record)
    return backend


def make_embedder(cfg: CliConfig) -> Embedder:
    kind, _, arg = cfg.embedder.partition(":")
    if kind == "test":
        return HashEmbedder(int(arg)) if arg else HashEmbedder()
    if kind == "lookup":
        try:
            return LookupEmbedder.from_file(arg)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load lookup embedder {arg!r}: {exc}") from None
    if not cfg.embed_url:
        raise ConfigError("remote embedder needs embed_url")
    return RemoteEmbedder(cfg.embed_url, cfg.embed_model, os.environ.get(API_KEY_ENV))
