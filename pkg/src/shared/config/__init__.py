"""
Config package
"""

from .settings import config, Config
from .run_config import RunConfig, load_run_config, SUBCOMMANDS

__all__ = ['config', 'Config', 'RunConfig', 'load_run_config', 'SUBCOMMANDS']
