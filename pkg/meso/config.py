"""Runtime configuration.

Precedence is: command-line flags > config file > built-in defaults.

The config file is a flat list of ``key = "value"`` lines (``#`` starts a
comment), read with python-dotenv's parser. By default ``./meso.toml`` is used
when it exists; ``--config PATH`` points elsewhere. See
``meso.toml.example`` for every key.

Secrets never go in the config file. The file names the *environment
variable* that holds each token (``llm_token_env``), and ``load_dotenv()``
lets you keep those variables in a local ``.env`` during development. Do
not commit a ``.env`` with real tokens.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Literal, Mapping, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError

DEFAULT_CONFIG_PATH = Path("meso.toml")


def _default_region() -> str:
    return os.getenv("AWS_REGION", os.getenv("AWS_DEFAULT_REGION", "us-east-1"))


class Settings(BaseModel):
    """Effective configuration for clients and orchestration."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    llm_endpoint: str = "http://127.0.0.1:8080/v1/chat/completions"
    llm_model: str = "claude-sonnet-4"
    llm_token_env: str = "MESO_LLM_TOKEN"
    llm_timeout: float = Field(default=60.0, gt=0)
    embedding_endpoint: str = "http://127.0.0.1:8080/v1/embeddings"
    embedding_model: str = "all-MiniLM-L6-v2"
    embedding_token_env: str = "MESO_EMBEDDING_TOKEN"
    embedding_timeout: float = Field(default=30.0, gt=0)
    aws_region: str = Field(default_factory=_default_region)
    parallelism: int = Field(default=1, ge=1)
    retries: int = Field(default=2, ge=0)

    def token(self, kind: Literal["llm", "embedding"]) -> Optional[str]:
        """Read the token from the environment variable the config names."""
        env_name = self.llm_token_env if kind == "llm" else self.embedding_token_env
        return os.getenv(env_name) or None

    def render(self) -> str:
        lines = [f'{key} = "{value}"' for key, value in sorted(self.model_dump().items())]
        return "\n".join(lines) + "\n"


def read_config_file(path: Path) -> dict[str, str]:
    try:
        values = dotenv_values(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return {key.strip().lower(): value for key, value in values.items() if value is not None}


def load_settings(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> Settings:
    """Merge defaults, the config file and flag overrides (``None`` = unset)."""
    load_dotenv()
    values: dict[str, Any] = {}
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file {path} not found")
        values.update(read_config_file(Path(path)))
    elif DEFAULT_CONFIG_PATH.is_file():
        values.update(read_config_file(DEFAULT_CONFIG_PATH))
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    try:
        return Settings(**values)
    except ValidationError as exc:
        err = exc.errors()[0]
        key = ".".join(str(part) for part in err["loc"])
        raise ConfigError(f"config key {key}: {err['msg']}") from exc
