"""Eigenfunction-expansion solver for degenerate time-fractional equations of high order in space."""

import json

from ._core import (
    ConfigError,
    ExpressionError,
    ResolutionError,
    caputo_l1_solve,
    eigs,
    kilbas_saigo,
    ks_solution,
    mittag_leffler,
    selftest,
)
from ._core import _solve_json

__all__ = [
    "ConfigError",
    "ExpressionError",
    "ResolutionError",
    "caputo_l1_solve",
    "eigs",
    "kilbas_saigo",
    "ks_solution",
    "mittag_leffler",
    "selftest",
    "solve",
]


def solve(config):
    """Solve the problem described by a config (dict or JSON text) without writing files.

    Returns a dict with the grids 'x' and 'y', the field 'u' (rows follow x), the
    spectrum, the coefficients, the truncation level and the residual norms.
    """
    text = config if isinstance(config, str) else json.dumps(config)
    return _solve_json(text)
