"""
Utilities package for the adalloc toolkit.

Contains configuration, logging and exact-rational helpers.
"""

from .config import Config, get_config, VERIFY_LEVELS
from .logger import setup_logging, get_logger, log_operation
from .rationals import parse_rational, format_rational, ceil_fraction, is_unit_fraction

__all__ = [
    'Config',
    'get_config',
    'VERIFY_LEVELS',
    'setup_logging',
    'get_logger',
    'log_operation',
    'parse_rational',
    'format_rational',
    'ceil_fraction',
    'is_unit_fraction'
]
