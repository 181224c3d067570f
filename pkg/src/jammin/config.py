"""Daemon configuration: a flat key/value file with [sections].

Secrets never live in the file; the API key is read from the environment
variable named by ``api_key_env_var``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .engine import Colors
from .formats import SelectionMode
from .llm import BackendConfig
from .protocol import DAEMON_PORT, DAW_PORT, MAX_COLOR_INDEX


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    daw_host: str = "127.0.0.1"
    daw_port: int = DAW_PORT
    listen_port: int = DAEMON_PORT
    poll_interval_s: float = 1.0
    selection_mode: SelectionMode = SelectionMode.KEYWORD
    backend: BackendConfig = field(default_factory=BackendConfig)
    colors: Colors = field(default_factory=Colors)
    snapshot_path: str = "jammin_state.json"
    fixture_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.daw_port == self.listen_port:
            raise ConfigError(f"daw_port and listen_port must differ (both {self.daw_port})")
        for name, port in (("daw_port", self.daw_port), ("listen_port", self.listen_port)):
            if not 1 <= port <= 65535:
                raise ConfigError(f"{name} out of range: {port}")
        if self.poll_interval_s <= 0:
            raise ConfigError(f"poll_interval_s must be positive: {self.poll_interval_s}")
        for name, color in (
            ("generating", self.colors.generating),
            ("done", self.colors.done),
            ("error", self.colors.error),
        ):
            if not 0 <= color <= MAX_COLOR_INDEX:
                raise ConfigError(f"colors.{name} out of range: {color}")


def load_config(path: str | Path) -> Config:
    parser = configparser.ConfigParser()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None

    def section(name: str) -> configparser.SectionProxy:
        return parser[name] if parser.has_section(name) else parser["DEFAULT"]

    daemon = section("daemon")
    backend_section = section("backend")
    colors_section = section("colors")
    try:
        mode_text = daemon.get("selection_mode", "keyword").strip().lower()
        try:
            selection_mode = SelectionMode(mode_text)
        except ValueError:
            raise ConfigError(f"selection_mode must be 'keyword' or 'model', got {mode_text!r}") from None
        backend = BackendConfig(
            base_url=backend_section.get("base_url", BackendConfig.base_url),
            model_name=backend_section.get("model_name", BackendConfig.model_name),
            api_key_env_var=backend_section.get("api_key_env_var", BackendConfig.api_key_env_var),
            temperature=backend_section.getfloat("temperature", BackendConfig.temperature),
            max_tokens=backend_section.getint("max_tokens", BackendConfig.max_tokens),
            request_timeout_s=backend_section.getfloat("request_timeout_s", BackendConfig.request_timeout_s),
        )
        colors = Colors(
            generating=colors_section.getint("generating", Colors.generating),
            done=colors_section.getint("done", Colors.done),
            error=colors_section.getint("error", Colors.error),
        )
        return Config(
            daw_host=daemon.get("daw_host", "127.0.0.1"),
            daw_port=daemon.getint("daw_port", DAW_PORT),
            listen_port=daemon.getint("listen_port", DAEMON_PORT),
            poll_interval_s=daemon.getfloat("poll_interval_s", 1.0),
            selection_mode=selection_mode,
            backend=backend,
            colors=colors,
            snapshot_path=daemon.get("snapshot_path", "jammin_state.json"),
            fixture_dir=daemon.get("fixture_dir", None),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value in {path}: {exc}") from None
