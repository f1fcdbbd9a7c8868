"""Run configuration files and run directories.

Config files are plain ``key = value`` lines with ``#`` comments. Command
line flags override file values; keys unknown to the command are rejected
up front. Outputs land in a fresh numbered directory under the run root
(``--run-dir`` flag, else the DEEPCK_RUN_DIR environment variable, else
``./runs``) together with a manifest recording the effective configuration.
Manifests carry no timestamps so identical runs produce identical trees.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

RUN_DIR_ENV = "DEEPCK_RUN_DIR"

TRUE_WORDS = {"true", "yes", "1", "on"}
FALSE_WORDS = {"false", "no", "0", "off"}


class ConfigError(ValueError):
    """Malformed config file, unknown key, or unparsable value."""


def parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{path}:{line_no}: empty key")
        if key in values:
            raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
        values[key] = value
    return values


@dataclass
class RunConfig:
    """Effective settings for one command invocation."""

    command: str
    values: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(
        cls,
        command: str,
        known_keys: Sequence[str],
        config_file: Optional[str] = None,
        overrides: Optional[Mapping[str, str]] = None,
    ) -> "RunConfig":
        known = set(known_keys)
        values: dict[str, str] = {}
        if config_file is not None:
            values.update(parse_config_file(config_file))
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(
                f"unknown key(s) for {command}: {', '.join(unknown)}; "
                f"known keys: {', '.join(sorted(known))}"
            )
        return cls(command=command, values=values)

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        value = self.values.get(key)
        return default if value is None or value == "" else value

    def require(self, key: str) -> str:
        value = self.get(key)
        if value is None:
            raise ConfigError(f"{self.command} requires '{key}' (config file or --{key.replace('_', '-')})")
        return value

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        value = self.get(key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"'{key}' must be an integer, got {value!r}") from exc

    def get_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        value = self.get(key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"'{key}' must be a number, got {value!r}") from exc

    def get_bool(self, key: str, default: bool = False) -> bool:
        value = self.get(key)
        if value is None:
            return default
        low = value.lower()
        if low in TRUE_WORDS:
            return True
        if low in FALSE_WORDS:
            return False
        raise ConfigError(f"'{key}' must be a boolean, got {value!r}")

    def get_choice(self, key: str, choices: Sequence[str], default: Optional[str] = None) -> Optional[str]:
        value = self.get(key, default)
        if value is not None and value not in choices:
            raise ConfigError(f"'{key}' must be one of {', '.join(choices)}, got {value!r}")
        return value


def resolve_run_root(flag_value: Optional[str] = None) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(RUN_DIR_ENV)
    if env:
        return Path(env)
    return Path("runs")


def prepare_run_dir(root: Path, command: str) -> Path:
    """Create and return the next numbered directory for this command."""
    base = root / command
    base.mkdir(parents=True, exist_ok=True)
    n = 1
    while True:
        candidate = base / f"run-{n:04d}"
        try:
            candidate.mkdir()
            return candidate
        except FileExistsError:
            n += 1


def write_manifest(run_dir: Path, config: RunConfig) -> None:
    manifest = {
        "command": config.command,
        "config": {k: config.values[k] for k in sorted(config.values)},
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
