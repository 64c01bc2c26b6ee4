"""Random planar trees weighted by their height.

Exact enumeration by height, partition functions and their asymptotics,
ball masses of the local limits, and samplers for finite and infinite trees.
"""
from __future__ import annotations

from .errors import (AmbiguousComparison, CapError, DomainError, ParseError, ShapeError,
                     SizeGuardError)
from .measure import BallSpec, MeasureValue, lambda_ball, nuN_ball_exact, xi_ball
from .partition import WeightParams, z_eval
from .series import CoeffTables, build_tables, load_tables, save_tables
from .trees import PlanarTree, ball, decode, encode, enumerate_all

__version__ = "0.1.0"

__all__ = [
    "AmbiguousComparison", "BallSpec", "CapError", "CoeffTables", "DomainError",
    "MeasureValue", "ParseError", "PlanarTree", "ShapeError", "SizeGuardError",
    "WeightParams", "ball", "build_tables", "decode", "encode", "enumerate_all",
    "lambda_ball", "load_tables", "nuN_ball_exact", "save_tables", "xi_ball", "z_eval",
]
