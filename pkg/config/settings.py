from functools import lru_cache
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class RuntimeSettings(BaseSettings):
    """Process-level settings read from the environment (or a local .env file).

    Only the worker count of the verify battery may be overridden from the
    environment; every numeric knob lives in the run config so reports stay
    re-runnable from their embedded config.
    """

    threads: Optional[int] = Field(default=None, ge=1, description="Worker threads for independent checks")

    model_config = SettingsConfigDict(
        env_prefix="NEGPOWER_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    def worker_count(self, requested: Optional[int] = None) -> int:
        if self.threads is not None:
            return self.threads
        return requested or 4


@lru_cache()
def get_settings() -> RuntimeSettings:
    return RuntimeSettings()
