# app/core/config.py

import logging
from typing import Literal

from pydantic import AnyHttpUrl, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    The main settings class that holds the complete, validated checker configuration.

    Every value can be overridden from the environment or a local `.env` file.
    Command-line flags are layered on top with `with_overrides`.
    """

    PROJECT_NAME: str = "amorna"
    API_V1_STR: str = "/api/v1"
    LOG_LEVEL: str = "INFO"

    # --- Constraint Solving ---
    ASSUME_CONSTRAINTS: bool = False
    SOLVER: Literal["builtin", "external"] = "builtin"
    EXTERNAL_SOLVER_URL: AnyHttpUrl | None = None
    EXTERNAL_SOLVER_TIMEOUT: float = 5.0
    CASE_SPLIT_DEPTH: int = Field(2, ge=0)
    CASE_SPLIT_CAP: int = Field(8, ge=0)

    # --- Bounded Oracle ---
    ORACLE_SIZE_BOUND: int = Field(5, ge=0)
    ORACLE_INT_LOW: int = -3
    ORACLE_INT_HIGH: int = 3
    MAX_ENUM: int = Field(1_000_000, gt=0)

    # --- Evaluation ---
    FUEL: int = Field(1_000_000, gt=0)

    # --- AARA Embedding ---
    COST_MODEL: Literal["zero", "unit"] = "zero"

    model_config = SettingsConfigDict(
        env_file=".env", case_sensitive=True, extra="ignore"
    )

    def with_overrides(self, **flags) -> "Settings":
        """Returns a copy with every non-None flag applied."""
        update = {key: value for key, value in flags.items() if value is not None}
        return self.model_copy(update=update)


def get_settings() -> Settings:
    """Initializes and returns the checker settings."""
    return Settings()


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


settings = get_settings()
