from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    PROJECT_NAME: str = "phonctx"
    # Reproducibility
    SEED: int = 7
    # Retrieval rule
    RELATIVE_FACTOR: float = 1.2
    ABSOLUTE_FLOOR: float = 0.2
    MAX_CANDIDATES: int = 10
    # Pronunciation handling
    PRONUNCIATION_CAP: int = 4
    ENTITY_CLASSES: List[str] = ["contact", "app", "playlist"]
    # Prompt rendering
    PROMPT_OPEN: str = "<s>"
    PROMPT_CLOSE: str = "</s>"
    PROMPT_SEPARATOR: str = " ; "
    # Runtime
    LOG_LEVEL: str = "WARNING"
    CACHE_MAX_ENTRIES: int = 50000

    model_config = SettingsConfigDict(env_file=".env", env_prefix="PHONCTX_", extra="ignore")


settings = Settings()
