"""Application configuration.

One YAML file drives the CLI and the service: fixture paths, retrieval
parameters, backend selection for the model and the embedder, and the bind
address. String values may reference environment variables as ``${NAME}``
(secrets stay out of the file); a referenced variable must exist.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import yaml

from .gateway import Backend, ReplayBackend, RemoteChatBackend, RuleBackend, echo_last_sell_rule
from .metrics import TOKENIZER_VERSION
from .retrieval import Embedder, HashEmbedder, PrecomputedEmbedder, RemoteEmbedder


class ConfigError(ValueError):
    pass


_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _interpolate(value):
    if isinstance(value, str):
        def sub(match):
            name = match.group(1)
            if name not in os.environ:
                raise ConfigError(f"environment variable {name} is not set")
            return os.environ[name]
        return _ENV_RE.sub(sub, value)
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    return value


@dataclass(frozen=True)
class PathsConfig:
    catalog: Optional[Path] = None
    library: Optional[Path] = None
    user_db: Optional[Path] = None
    templates: Optional[Path] = None
    cassette: Optional[Path] = None


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 3
    n: int = 20


@dataclass(frozen=True)
class LlmConfig:
    backend: str = "rule"        # remote | replay | rule
    model: str = "default"
    endpoint: Optional[str] = None
    api_key: Optional[str] = None


@dataclass(frozen=True)
class EmbedderConfig:
    backend: str = "hash"        # hash | remote | precomputed
    dim: int = 64
    ngram: int = 3
    endpoint: Optional[str] = None
    model: Optional[str] = None
    vectors_file: Optional[Path] = None


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000


@dataclass(frozen=True)
class AppConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    tokenizer_version: str = TOKENIZER_VERSION


def _opt_path(base: Path, value) -> Optional[Path]:
    if value is None:
        return None
    path = Path(str(value))
    return path if path.is_absolute() else base / path


def load_config(path: Optional[Union[str, Path]] = None, require_files: bool = True) -> AppConfig:
    """Load and validate configuration; defaults apply when path is None.

    require_files=False skips existence checks, for commands that create
    the files they reference (e.g. building the library).
    """
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    raw = _interpolate(raw)
    base = path.parent

    paths_raw = raw.get("paths", {}) or {}
    paths = PathsConfig(
        catalog=_opt_path(base, paths_raw.get("catalog")),
        library=_opt_path(base, paths_raw.get("library")),
        user_db=_opt_path(base, paths_raw.get("user_db")),
        templates=_opt_path(base, paths_raw.get("templates")),
        cassette=_opt_path(base, paths_raw.get("cassette")),
    )
    retrieval_raw = raw.get("retrieval", {}) or {}
    retrieval = RetrievalConfig(
        k=int(retrieval_raw.get("k", 3)),
        n=int(retrieval_raw.get("n", 20)),
    )
    llm_raw = raw.get("llm", {}) or {}
    llm = LlmConfig(
        backend=str(llm_raw.get("backend", "rule")),
        model=str(llm_raw.get("model", "default")),
        endpoint=llm_raw.get("endpoint"),
        api_key=llm_raw.get("api_key"),
    )
    emb_raw = raw.get("embedder", {}) or {}
    embedder = EmbedderConfig(
        backend=str(emb_raw.get("backend", "hash")),
        dim=int(emb_raw.get("dim", 64)),
        ngram=int(emb_raw.get("ngram", 3)),
        endpoint=emb_raw.get("endpoint"),
        model=emb_raw.get("model"),
        vectors_file=_opt_path(base, emb_raw.get("vectors_file")),
    )
    service_raw = raw.get("service", {}) or {}
    service = ServiceConfig(
        host=str(service_raw.get("host", "127.0.0.1")),
        port=int(service_raw.get("port", 8000)),
    )
    config = AppConfig(
        paths=paths,
        retrieval=retrieval,
        llm=llm,
        embedder=embedder,
        service=service,
        tokenizer_version=str(raw.get("tokenizer_version", TOKENIZER_VERSION)),
    )
    validate_config(config, require_files=require_files)
    return config


def validate_config(config: AppConfig, require_files: bool = True) -> None:
    if config.retrieval.k < 0:
        raise ConfigError(f"retrieval.k must be >= 0, got {config.retrieval.k}")
    if config.retrieval.n < 1:
        raise ConfigError(f"retrieval.n must be >= 1, got {config.retrieval.n}")
    if config.llm.backend not in ("remote", "replay", "rule"):
        raise ConfigError(f"unknown llm backend {config.llm.backend!r}")
    if config.llm.backend == "remote" and not config.llm.endpoint:
        raise ConfigError("llm.backend remote requires llm.endpoint")
    if config.llm.backend == "replay" and config.paths.cassette is None:
        raise ConfigError("llm.backend replay requires paths.cassette")
    if config.embedder.backend not in ("hash", "remote", "precomputed"):
        raise ConfigError(f"unknown embedder backend {config.embedder.backend!r}")
    if config.embedder.backend == "remote" and not (config.embedder.endpoint and config.embedder.model):
        raise ConfigError("embedder.backend remote requires endpoint and model")
    if config.embedder.backend == "precomputed" and config.embedder.vectors_file is None:
        raise ConfigError("embedder.backend precomputed requires vectors_file")
    if config.tokenizer_version != TOKENIZER_VERSION:
        raise ConfigError(
            f"config pins tokenizer {config.tokenizer_version!r} but this build "
            f"provides {TOKENIZER_VERSION!r}")
    if not 1 <= config.service.port <= 65535:
        raise ConfigError(f"service.port out of range: {config.service.port}")
    if require_files:
        for name in ("catalog", "library", "user_db", "templates", "cassette"):
            value: Optional[Path] = getattr(config.paths, name)
            if value is not None and not value.exists():
                raise ConfigError(f"paths.{name} does not exist: {value}")
        if config.embedder.vectors_file is not None and not config.embedder.vectors_file.exists():
            raise ConfigError(f"embedder.vectors_file does not exist: {config.embedder.vectors_file}")


def make_embedder(config: AppConfig) -> Embedder:
    emb = config.embedder
    if emb.backend == "hash":
        return HashEmbedder(dim=emb.dim, ngram=emb.ngram)
    if emb.backend == "precomputed":
        return PrecomputedEmbedder.from_file(emb.vectors_file)
    return RemoteEmbedder(endpoint=emb.endpoint, model=emb.model, api_key=config.llm.api_key)


def make_backend(config: AppConfig) -> Backend:
    llm = config.llm
    if llm.backend == "replay":
        return ReplayBackend(config.paths.cassette)
    if llm.backend == "remote":
        return RemoteChatBackend(endpoint=llm.endpoint, api_key=llm.api_key)
    return RuleBackend([echo_last_sell_rule()])
