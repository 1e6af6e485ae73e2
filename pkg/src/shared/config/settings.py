"""
Configuration module for fblab
"""
import logging
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    """Application configuration"""

    # Paths
    PROJECT_ROOT = Path(__file__).parent.parent.parent.parent
    OUTPUT_ROOT = Path(os.getenv("FBLAB_OUT", str(PROJECT_ROOT / "runs")))

    # Logging
    LOG_LEVEL = os.getenv("FBLAB_LOG_LEVEL", "INFO").upper()

    # Solver defaults
    MAX_ITERS = int(os.getenv("FBLAB_MAX_ITERS", "2000"))
    ENERGY_TOL = float(os.getenv("FBLAB_ENERGY_TOL", "1e-10"))
    SHOOT_TOL = float(os.getenv("FBLAB_SHOOT_TOL", "1e-10"))
    SOLVE_TOL = float(os.getenv("FBLAB_SOLVE_TOL", "1e-10"))
    CG_MAX_ITERS = 100_000

    # Sweeps
    JOBS = int(os.getenv("FBLAB_JOBS", "1"))

    @classmethod
    def output_root(cls) -> Path:
        """Output root, re-read so FBLAB_OUT set after import still applies"""
        return Path(os.getenv("FBLAB_OUT", str(cls.OUTPUT_ROOT)))

    @classmethod
    def validate(cls) -> bool:
        """Validate configuration values"""
        if cls.MAX_ITERS < 1:
            raise ValueError("FBLAB_MAX_ITERS must be at least 1")
        for name in ("ENERGY_TOL", "SHOOT_TOL", "SOLVE_TOL"):
            if getattr(cls, name) <= 0:
                raise ValueError(f"FBLAB_{name} must be positive")
        if cls.JOBS < 1:
            raise ValueError("FBLAB_JOBS must be at least 1")
        if not isinstance(logging.getLevelName(cls.LOG_LEVEL), int):
            raise ValueError(f"Unknown log level: {cls.LOG_LEVEL}")
        return True

    @classmethod
    def create_directories(cls, out_dir=None) -> Path:
        """Create the output directory for a run"""
        target = Path(out_dir) if out_dir is not None else cls.output_root()
        os.makedirs(target, exist_ok=True)
        return target


# Initialize configuration
config = Config()
