"""
Configuration management for procbench
Environment-backed settings, one class per concern
"""

import os
from pathlib import Path
from typing import Optional, List
from functools import lru_cache

from pydantic import AliasChoices, Field, SecretStr
from pydantic_settings import BaseSettings, SettingsConfigDict


_ENV_CONFIG = SettingsConfigDict(
    env_file=".env",
    env_file_encoding="utf-8",
    case_sensitive=False,
    extra="ignore",
    populate_by_name=True,
)


class LoggingSettings(BaseSettings):
    """Logging configuration"""
    model_config = _ENV_CONFIG

    level: str = Field(default="INFO", validation_alias="LOG_LEVEL")
    format: str = Field(default="json", validation_alias="LOG_FORMAT")


class EndpointSettings(BaseSettings):
    """OpenAI-compatible chat-completions endpoint"""
    model_config = _ENV_CONFIG

    base_url: str = Field(
        default="https://api.openai.com/v1",
        validation_alias=AliasChoices("PROCBENCH_BASE_URL", "OPENAI_BASE_URL"),
    )
    api_key: Optional[SecretStr] = Field(
        default=None,
        validation_alias=AliasChoices("PROCBENCH_API_KEY", "OPENAI_API_KEY"),
    )
    model_name: str = Field(default="gpt-4o", validation_alias="PROCBENCH_MODEL")
    request_timeout: float = Field(default=60.0, gt=0, validation_alias="PROCBENCH_TIMEOUT")
    max_parallel: int = Field(default=4, ge=1, validation_alias="PROCBENCH_MAX_PARALLEL")
    max_retries: int = Field(default=5, ge=0, validation_alias="PROCBENCH_MAX_RETRIES")
    backoff_base: float = Field(default=1.0, gt=0, validation_alias="PROCBENCH_BACKOFF_BASE")
    backoff_max: float = Field(default=30.0, gt=0, validation_alias="PROCBENCH_BACKOFF_MAX")
    temperature: float = Field(default=0.0, ge=0, validation_alias="PROCBENCH_TEMPERATURE")
    max_tokens: int = Field(default=1024, ge=1, validation_alias="PROCBENCH_MAX_TOKENS")


class MediaSettings(BaseSettings):
    """Frame sampling, overlay and storyboard configuration"""
    model_config = _ENV_CONFIG

    fps: float = Field(default=1.0, gt=0, validation_alias="PROCBENCH_FPS")
    timestamp_format: str = Field(
        default="{seconds:02d}:{millis:03d}", validation_alias="PROCBENCH_TIMESTAMP_FORMAT"
    )
    overlay_scale: int = Field(default=1, ge=1, validation_alias="PROCBENCH_OVERLAY_SCALE")
    overlay_max_fraction: float = Field(
        default=0.25, gt=0, le=1, validation_alias="PROCBENCH_OVERLAY_MAX_FRACTION"
    )
    storyboard_max_width: int = Field(
        default=16384, ge=1, validation_alias="PROCBENCH_STORYBOARD_MAX_WIDTH"
    )


class EvaluationSettings(BaseSettings):
    """Metric defaults mirroring the reported tables"""
    model_config = _ENV_CONFIG

    iou_thresholds: List[float] = Field(default=[0.3, 0.5, 0.7])
    hit_tolerances: List[float] = Field(default=[0.5, 1.0, 2.0])
    missing_tolerances: List[float] = Field(default=[0.5, 1.0])
    caption_threshold: float = Field(default=0.3, gt=0, le=1)
    exclude_abstentions: bool = Field(default=False, validation_alias="PROCBENCH_EXCLUDE_ABSTENTIONS")


class PerturbationSettings(BaseSettings):
    """Dataset synthesis defaults"""
    model_config = _ENV_CONFIG

    root_seed: int = Field(default=0, ge=0, validation_alias="PROCBENCH_SEED")
    mask_placeholder: str = Field(default="<MASKED>")


class WorkerSettings(BaseSettings):
    """Bounded worker pool for per-video work items"""
    model_config = _ENV_CONFIG

    workers: int = Field(default=4, ge=1, validation_alias="PROCBENCH_WORKERS")


class Settings(BaseSettings):
    """Main application settings"""
    model_config = _ENV_CONFIG

    # Application info
    app_name: str = "procbench"
    app_version: str = "1.0.0"
    environment: str = Field(default="development", validation_alias="ENVIRONMENT")

    # Component settings
    logging: LoggingSettings = Field(default_factory=LoggingSettings)
    endpoint: EndpointSettings = Field(default_factory=EndpointSettings)
    media: MediaSettings = Field(default_factory=MediaSettings)
    evaluation: EvaluationSettings = Field(default_factory=EvaluationSettings)
    perturbation: PerturbationSettings = Field(default_factory=PerturbationSettings)
    worker: WorkerSettings = Field(default_factory=WorkerSettings)

    # Paths
    base_dir: Path = Path(__file__).parent.parent.parent
    prompts_dir: Optional[Path] = Field(default=None, validation_alias="PROCBENCH_PROMPTS_DIR")


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return get_environment_settings()


# Environment-specific settings
class DevelopmentSettings(Settings):
    """Development environment settings"""
    model_config = SettingsConfigDict(**{**_ENV_CONFIG, "env_file": ".env.development"})

    environment: str = "development"


class ProductionSettings(Settings):
    """Production environment settings"""
    model_config = SettingsConfigDict(**{**_ENV_CONFIG, "env_file": ".env.production"})

    environment: str = "production"


class TestingSettings(Settings):
    """Testing environment settings"""
    model_config = SettingsConfigDict(**{**_ENV_CONFIG, "env_file": ".env.testing"})

    environment: str = "testing"


def get_environment_settings() -> Settings:
    """Get settings based on environment"""
    env = os.getenv("ENVIRONMENT", "development").lower()

    if env == "production":
        return ProductionSettings()
    elif env == "testing":
        return TestingSettings()
    else:
        return DevelopmentSettings()
