from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    APP_NAME: str = "SHS Survey Toolkit"
    APP_VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"

    # Default cost-assumptions JSON for the cost commands
    SHS_ASSUMPTIONS: Optional[str] = None

    # PGM/PPM inputs carry no geospatial metadata
    DEFAULT_GSD_M: float = 0.03

    # None means one worker per core
    DEFAULT_JOBS: Optional[int] = None

    OUTPUT_DECIMALS: int = 6

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
