"""
Configuration module for the LEO offloading simulator
"""
from pathlib import Path
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    model_config = SettingsConfigDict(
        env_prefix="LEO_OFFLOAD_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Output Configuration
    output_root: Path = Field(default=Path("runs"))

    # Worker Pool Configuration
    max_workers: int = Field(default=2, ge=1)
    max_queue_size: int = Field(default=256, ge=1)

    # Oracle Configuration
    oracle_cap: int = Field(default=10_000_000, ge=1)

    # Logging Configuration
    log_level: str = Field(default="INFO")


# Global settings instance
settings = Settings()
