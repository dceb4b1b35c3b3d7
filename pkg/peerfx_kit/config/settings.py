"""Process-level settings for peerfx-kit."""

from pathlib import Path
from typing import Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class PeerfxSettings(BaseSettings):
    """Defaults that apply to every invocation.

    All settings can be overridden via environment variables with PEERFX_ prefix.
    Example: PEERFX_THREADS=4 PEERFX_LOG_LEVEL=debug
    Command-line flags take precedence over these values.
    """

    model_config = SettingsConfigDict(
        env_prefix="PEERFX_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: Literal["debug", "info", "warning", "error"] = Field(
        default="info", description="Root log level for the CLI"
    )
    threads: int = Field(
        default=1,
        ge=1,
        description="Worker count for running benchmark cells concurrently",
    )
    output_dir: Optional[Path] = Field(
        default=None,
        description="Fallback output directory when neither --out nor the config sets one",
    )
    float_format: str = Field(
        default="%.17g",
        description="printf-style format for reals written to CSV files",
    )
