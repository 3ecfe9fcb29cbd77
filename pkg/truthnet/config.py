"""Configuration settings for the truth discovery toolkit."""
from functools import lru_cache
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Toolkit settings from environment variables"""

    # Logging
    log_level: str = "INFO"

    # Model hyper-parameters (defaults used in the synthetic experiments)
    alpha: float = 0.1
    g0: float = 1.0
    h0: float = 1.0
    log_mean: float = 2.0
    log_var: float = 0.7
    epsilon: float = 0.05
    max_communities: int = 10

    # VISIT
    visit_max_iters: int = 200
    visit_tol: float = 1e-4

    # S-VISIT
    svisit_max_iters: int = 1000
    svisit_tol: float = 1e-4
    svisit_tau: float = 1.0
    svisit_kappa: float = 0.7

    # Experiments
    workers: int = 1
    output_dir: str = "output"
    schema_version: int = 1

    class Config:
        """Pydantic configuration."""
        env_file = ".env"
        case_sensitive = False
        extra = "ignore"  # Ignore extra fields from .env


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
