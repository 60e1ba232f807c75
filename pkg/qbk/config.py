"""Process settings and search bounds.

Settings only steer logging. What a search explores is fixed by
:class:`SearchLimits`, which is built from command-line flags so that two runs
with the same flags always visit the same models.
"""

from __future__ import annotations

import argparse
import sys
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import QBKError

BASE_DIR = Path(__file__).resolve().parent.parent
ENV_FILE = BASE_DIR / ".env"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
LOG_FORMATS = ("json", "text")


class ConfigurationError(QBKError):
    """Settings or search limits failed validation."""


class Settings(BaseSettings):
    """``QBK_LOG_LEVEL`` and ``QBK_LOG_FORMAT`` from the environment or ``.env``."""

    model_config = SettingsConfigDict(
        extra="ignore",
        populate_by_name=True,
        env_file=str(ENV_FILE),
        env_file_encoding="utf-8",
    )

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field("WARNING", alias="QBK_LOG_LEVEL")
    log_format: Literal["json", "text"] = Field("json", alias="QBK_LOG_FORMAT")

    @field_validator("log_level", "log_format", mode="before")
    @classmethod
    def _fold_case(cls, value: object, info: ValidationInfo) -> object:
        if not isinstance(value, str):
            return value
        value = value.strip()
        return value.upper() if info.field_name == "log_level" else value.lower()

    def as_env(self) -> Dict[str, str]:
        return {field.alias or name: str(getattr(self, name)) for name, field in type(self).model_fields.items()}


class SearchLimits(BaseModel):
    """Bounds for enumeration and countermodel search."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_worlds: int = Field(3, ge=1)
    max_domain: int = Field(2, ge=1)
    max_models: int = Field(10_000_000, ge=1)
    workers: int = Field(1, ge=1)


_ALIASES: Dict[str, str] = {name: field.alias or name for name, field in Settings.model_fields.items()}


def _configuration_error(title: str, exc: ValidationError) -> ConfigurationError:
    details: List[str] = []
    for problem in exc.errors():
        message = problem.get("msg", "invalid value")
        if problem.get("loc"):
            where = str(problem["loc"][-1])
            details.append(f"{_ALIASES.get(where, where)}: {message}")
        else:
            details.append(message)
    body = "\n".join(f"  - {line}" for line in details)
    return ConfigurationError(f"{title}:\n{body}", details=details)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Settings for this process, read once until :func:`reset_settings_cache`."""

    try:
        return Settings()  # type: ignore[call-arg]
    except ValidationError as exc:
        raise _configuration_error("Invalid environment configuration", exc) from exc


def reset_settings_cache() -> None:
    get_settings.cache_clear()


def validate_env_map(values: Mapping[str, str]) -> Settings:
    """Check raw ``KEY=value`` pairs; keys other than ``QBK_*`` settings are ignored."""

    known = set(_ALIASES.values())
    try:
        return Settings.model_validate({key: value for key, value in values.items() if key in known})
    except ValidationError as exc:
        raise _configuration_error("Invalid environment configuration", exc) from exc


def build_search_limits(**values: Any) -> SearchLimits:
    """:class:`SearchLimits` from keyword arguments; ``None`` means the default."""

    try:
        return SearchLimits(**{key: value for key, value in values.items() if value is not None})
    except ValidationError as exc:
        raise _configuration_error("Invalid search limits", exc) from exc


def read_env_file(path: Path) -> Dict[str, str]:
    """``KEY=value`` pairs of a dotenv file, or ``{}`` when it is missing."""

    if not path.is_file():
        return {}
    pairs: Dict[str, str] = {}
    for raw in path.read_text(encoding="utf-8").splitlines():
        key, sep, value = raw.strip().partition("=")
        if sep and key and not key.startswith("#"):
            pairs[key.strip()] = value.strip()
    return pairs


def _report(exc: ConfigurationError) -> int:
    print(exc.message, file=sys.stderr)
    return 1


def main(argv: Sequence[str] | None = None) -> int:
    """``python -m qbk.config validate|show``."""

    parser = argparse.ArgumentParser(prog="python -m qbk.config", description="Check or print qbk settings.")
    commands = parser.add_subparsers(dest="command")
    check = commands.add_parser("validate", help="check a .env file against the settings schema")
    check.add_argument("--path", type=Path, default=ENV_FILE, help="dotenv file (default: %(default)s)")
    commands.add_parser("show", help="print the effective settings")
    args = parser.parse_args(argv)

    if args.command == "validate":
        if not args.path.is_file():
            print(f"Environment file not found: {args.path}", file=sys.stderr)
            return 1
        try:
            validate_env_map(read_env_file(args.path))
        except ConfigurationError as exc:
            return _report(exc)
        print(f"{args.path} is valid.")
        return 0

    if args.command == "show":
        try:
            effective = get_settings()
        except ConfigurationError as exc:
            return _report(exc)
        print("\n".join(f"{key}={value}" for key, value in sorted(effective.as_env().items())))
        return 0

    parser.print_help()
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
