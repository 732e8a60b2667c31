"""Exact verification of guarded, history-free probabilistic network programs."""

from .analysis import (compare_order, delivery_probability, equivalent, hop_stats,
                       output_distribution)
from .compile import CompileConfig
from .domain import ResourceError
from .syntax import parse_module, parse_pred, parse_program, pretty

__all__ = [
    "CompileConfig", "ResourceError", "compare_order", "delivery_probability",
    "equivalent", "hop_stats", "output_distribution", "parse_module", "parse_pred",
    "parse_program", "pretty",
]
__version__ = "0.1.0"
