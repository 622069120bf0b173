"""
Configuration management for the adalloc toolkit.

Handles environment variables, oracle and generator size caps, verification
defaults and logging settings.
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


VERIFY_LEVELS = ("off", "ratio", "full")


@dataclass
class Config:
    """Toolkit configuration settings"""

    # Oracle caps
    brute_force_slot_cap: int = 12
    hall_advertiser_cap: int = 20
    exact_oracle_edge_cap: int = 500000

    # Generator caps
    max_generated_advertisers: int = 1 << 17
    max_star_slots: int = 200000

    # Certification
    default_verify_level: str = "ratio"

    # Experiments
    trial_workers: int = 4

    # Reporting
    precision_digits: int = 30
    report_directory: str = "reports"
    debug_mode: bool = False

    # Logging
    log_level: str = "INFO"
    log_file: str = "logs/adalloc.log"

    def __post_init__(self):
        """Normalize values that came in as free text"""
        self.default_verify_level = self.default_verify_level.lower()
        if self.default_verify_level not in VERIFY_LEVELS:
            self.default_verify_level = "ratio"

    @classmethod
    def from_environment(cls) -> 'Config':
        """Create configuration from environment variables"""
        return cls(
            # Oracle
            brute_force_slot_cap=int(os.getenv("ADALLOC_BRUTE_FORCE_CAP", "12")),
            hall_advertiser_cap=int(os.getenv("ADALLOC_HALL_CAP", "20")),
            exact_oracle_edge_cap=int(os.getenv("ADALLOC_EXACT_EDGE_CAP", "500000")),

            # Generators
            max_generated_advertisers=int(os.getenv("ADALLOC_MAX_ADVERTISERS", str(1 << 17))),
            max_star_slots=int(os.getenv("ADALLOC_MAX_STAR_SLOTS", "200000")),

            # Certification
            default_verify_level=os.getenv("ADALLOC_VERIFY", "ratio"),

            # Experiments
            trial_workers=max(1, int(os.getenv("ADALLOC_TRIAL_WORKERS", "4"))),

            # Reporting
            precision_digits=int(os.getenv("ADALLOC_PRECISION", "30")),
            report_directory=os.getenv("ADALLOC_REPORT_DIR", "reports"),
            debug_mode=os.getenv("ADALLOC_DEBUG", "false").lower() == "true",

            # Logging
            log_level=os.getenv("ADALLOC_LOG_LEVEL", "INFO"),
            log_file=os.getenv("ADALLOC_LOG_FILE", "logs/adalloc.log")
        )

    def ensure_directories(self):
        """Create necessary directories"""
        directories = [
            Path(self.report_directory),
            Path(self.log_file).parent
        ]

        for directory in directories:
            if directory and directory != Path("."):
                directory.mkdir(parents=True, exist_ok=True)

    def estimate_memory_bytes(self, advertisers: int, edges: int) -> int:
        """Rough memory needed to hold an instance and one run over it"""
        return advertisers * 400 + edges * 250


# Global configuration instance
_config: Optional[Config] = None


def get_config() -> Config:
    """Get global configuration instance"""
    global _config
    if _config is None:
        _config = Config.from_environment()
    return _config
