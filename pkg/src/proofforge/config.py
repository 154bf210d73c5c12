"""Flat ``key = value`` configuration with environment lookup and flag overrides."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Mapping, Optional, Union

ENV_VAR = "PROOFFORGE_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    hammer_timeout_s: int = 10
    slow_threshold_ms: int = 2000
    session_budget_ms: int = 120_000
    workers: int = 4
    max_iterations: int = 20
    automated_prompt_prefix: str = "Read CLAUDE.md"
    backend_command: Optional[str] = None
    check_command: Optional[str] = None
    decomposer_command: Optional[str] = None
    theme_rules_path: Optional[str] = None
    mock_table_path: Optional[str] = None

    def __post_init__(self) -> None:
        for name in ("hammer_timeout_s", "slow_threshold_ms", "session_budget_ms", "max_iterations"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def render(self) -> str:
        lines = []
        for k, v in self.to_dict().items():
            lines.append(f"{k} = {'' if v is None else v}")
        return "\n".join(lines)


_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(key: str, value: str):
    kind = _TYPES[key]
    if kind == "int":
        try:
            return int(value.replace("_", ""))
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if kind == "Optional[str]":
        return value or None
    return value


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        out[key] = _coerce(key, value)
    return out


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, object]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> Config:
    """Defaults, then the file (``path`` or ``$PROOFFORGE_CONFIG``), then overrides."""
    env = os.environ if env is None else env
    if path is None:
        path = env.get(ENV_VAR) or None
    values: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(parse_config_text(text, str(path)))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    try:
        return replace(Config(), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


__all__ = ["Config", "ConfigError", "ENV_VAR", "load_config", "parse_config_text"]
