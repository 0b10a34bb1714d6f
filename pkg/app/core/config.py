from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    # Environment
    ENV: str = "development"
    DEBUG: bool = False

    # Experiment output
    OUTPUT_DIR: str = "results"
    EXPERIMENT_WORKERS: int = 1  # 1 = run cells sequentially

    # Solver defaults (overridden per run by [solver] config sections)
    DEFAULT_NODE_LIMIT: int = 200_000
    DEFAULT_TIME_LIMIT_S: Optional[float] = None

    # HTTP surface
    MAX_FIT_ROWS: int = 200  # embedded solver is desk-scale
    API_PREFIX: str = "/api/v1"

    # Service Configuration
    SERVICE_NAME: str = "symtree"
    SERVICE_VERSION: str = "1.0.0"

    class Config:
        env_file = ".env"
        extra = "ignore"


settings = Settings()
