import os
import logging
from fractions import Fraction
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


def _int_env(name: str, default: int, minimum: int = 0) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


class Settings:
    """Runtime knobs for every module, read from the environment (.env supported)"""

    def __init__(self):
        self.default_effort = _int_env("IDEAL_LAB_EFFORT", 20)
        self.enumeration_cap = _int_env("IDEAL_LAB_ENUMERATION_CAP", 1_000_000, minimum=1)
        self.exact_terms = _int_env("IDEAL_LAB_EXACT_TERMS", 2048, minimum=1)
        self.divergence_threshold = Fraction(_int_env("IDEAL_LAB_DIVERGENCE_THRESHOLD", 1000, minimum=1))
        self.annotation_window = _int_env("IDEAL_LAB_ANNOTATION_WINDOW", 1_000_000, minimum=1024)
        self.annotation_side = _int_env("IDEAL_LAB_ANNOTATION_SIDE", 128, minimum=4)
        self.detector_window = _int_env("IDEAL_LAB_DETECTOR_WINDOW", 4096, minimum=16)
        self.seed = _int_env("IDEAL_LAB_SEED", 0)
        self.cache_size = _int_env("IDEAL_LAB_CACHE_SIZE", 512, minimum=1)
        self.precision_bits = _int_env("IDEAL_LAB_PRECISION_BITS", 64, minimum=8)
        self.log_level = os.getenv("IDEAL_LAB_LOG_LEVEL", "INFO").upper()

        if not isinstance(logging.getLevelName(self.log_level), int):
            raise ValueError(f"IDEAL_LAB_LOG_LEVEL must be a logging level name, got {self.log_level!r}")

    def effort_or_default(self, effort) -> int:
        return self.default_effort if effort is None else effort

    def as_dict(self):
        return {
            "default_effort": self.default_effort,
            "enumeration_cap": self.enumeration_cap,
            "exact_terms": self.exact_terms,
            "divergence_threshold": str(self.divergence_threshold),
            "annotation_window": self.annotation_window,
            "annotation_side": self.annotation_side,
            "detector_window": self.detector_window,
            "seed": self.seed,
            "cache_size": self.cache_size,
            "precision_bits": self.precision_bits,
        }


# Global settings instance
settings = Settings()
