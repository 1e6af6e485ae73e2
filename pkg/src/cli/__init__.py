"""
fblab command line
"""

from .main import run, build_parser

__all__ = ['run', 'build_parser']
