import logging
from functools import lru_cache
from typing import Literal

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings(BaseSettings):
    """Process-level settings, read from OSN_* environment variables"""

    model_config = SettingsConfigDict(env_prefix="OSN_", env_file=".env", extra="ignore")

    database_url: str = "sqlite:///./osn_runs.db"
    out_dir: str = "./runs"
    log_level: str = "INFO"
    precision: Literal["f32", "f64"] = "f64"
    workers: int = Field(1, ge=1)

    @field_validator("database_url")
    @classmethod
    def normalize_postgres_dialect(cls, value: str) -> str:
        # Ensure PostgreSQL dialect is specified
        if value.startswith("postgres://"):
            return value.replace("postgres://", "postgresql://", 1)
        return value


@lru_cache
def get_settings() -> Settings:
    return Settings()


def reset_settings() -> None:
    """Forget the cached settings (tests change the environment)"""
    get_settings.cache_clear()


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)
