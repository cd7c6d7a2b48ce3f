"""Application configuration."""
import os
from dataclasses import dataclass


@dataclass
class AppConfig:
    """Process-wide settings read from the environment."""

    output_dir: str = "./output"
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "AppConfig":
        """Load config from environment variables."""
        return cls(
            output_dir=os.getenv("MMTG_OUTPUT_DIR", "./output"),
            log_level=os.getenv("MMTG_LOG_LEVEL", "INFO").upper(),
        )


# Global instance
app_config = AppConfig.from_env()
