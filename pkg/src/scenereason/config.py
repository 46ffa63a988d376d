"""Flat, commented, key-per-line run configuration.

Every geometric threshold and interpreter limit is a top-level key named
exactly as in RelationConfig / ExecLimits, so a saved config reloads
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .relations import RelationConfig
from .script import ExecLimits


class ConfigError(Exception):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    """`key = value` lines; blank lines and '#' comments are ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


_PATH_KEYS = (
    "scene_dir",
    "questions_file",
    "prompt_assets",
    "synonym_table",
    "label_embeddings",
    "knn_references",
    "script_file",
    "output_dir",
)
_STR_KEYS = ("backend", "base_url", "model", "api_key_env")
_FLOAT_KEYS = ("temperature", "timeout") + RelationConfig.field_names()
_INT_KEYS = (
    "retries",
    "max_iterations",
    "parallelism",
    "max_steps",
    "max_api_calls",
    "max_stdout_bytes",
)


@dataclass
class RunConfig:
    scene_dir: Path | None = None
    questions_file: Path | None = None
    prompt_assets: Path | None = None
    synonym_table: Path | None = None
    label_embeddings: Path | None = None
    knn_references: Path | None = None
    script_file: Path | None = None
    output_dir: Path = Path(".")
    backend: str = "scripted"
    base_url: str = ""
    model: str = "gpt-3.5-turbo-16k"
    temperature: float = 0.0
    timeout: float = 60.0
    retries: int = 2
    api_key_env: str = "OPENAI_API_KEY"
    max_iterations: int = 3
    parallelism: int = 1
    limits: ExecLimits = field(default_factory=ExecLimits)
    relations: RelationConfig = field(default_factory=RelationConfig)

    def __post_init__(self):
        if self.backend not in ("scripted", "http"):
            raise ConfigError(f"backend must be scripted or http, got {self.backend!r}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")


def config_from_mapping(raw: dict[str, str], base_dir: Path | None = None) -> RunConfig:
    known = set(_PATH_KEYS) | set(_STR_KEYS) | set(_FLOAT_KEYS) | set(_INT_KEYS)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    kwargs: dict = {}
    for key in _PATH_KEYS:
        if key in raw and raw[key]:
            path = Path(raw[key])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            kwargs[key] = path
    for key in _STR_KEYS:
        if key in raw:
            kwargs[key] = raw[key]

    def typed(key: str, conv):
        try:
            return conv(raw[key])
        except ValueError:
            raise ConfigError(f"config key {key!r}: bad value {raw[key]!r}") from None

    relation_kwargs = {}
    for key in _FLOAT_KEYS:
        if key not in raw:
            continue
        value = typed(key, float)
        if key in RelationConfig.field_names():
            relation_kwargs[key] = value
        else:
            kwargs[key] = value
    limit_kwargs = {}
    for key in _INT_KEYS:
        if key not in raw:
            continue
        value = typed(key, int)
        if key in ("max_steps", "max_api_calls", "max_stdout_bytes"):
            limit_kwargs[key] = value
        else:
            kwargs[key] = value

    try:
        kwargs["relations"] = RelationConfig(**relation_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    kwargs["limits"] = ExecLimits(**limit_kwargs)
    return RunConfig(**kwargs)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        raw = parse_config_text(f.read())
    return config_from_mapping(raw, base_dir=path.parent)


def format_config(cfg: RunConfig) -> str:
    """Emit a config file that reloads to an identical RunConfig."""
    lines = ["# run configuration"]
    for key in _PATH_KEYS:
        value = getattr(cfg, key)
        if value is not None:
            lines.append(f"{key} = {value}")
    for key in _STR_KEYS:
        lines.append(f"{key} = {getattr(cfg, key)}")
    for key in ("temperature", "timeout"):
        lines.append(f"{key} = {getattr(cfg, key)!r}")
    for key in ("retries", "max_iterations", "parallelism"):
        lines.append(f"{key} = {getattr(cfg, key)}")
    lines.append("")
    lines.append("# interpreter limits")
    for f_ in fields(ExecLimits):
        lines.append(f"{f_.name} = {getattr(cfg.limits, f_.name)}")
    lines.append("")
    lines.append("# geometric thresholds")
    for name in RelationConfig.field_names():
        lines.append(f"{name} = {getattr(cfg.relations, name)!r}")
    return "\n".join(lines) + "\n"
