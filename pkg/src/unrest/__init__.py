"""Reaction-diffusion toolkit for coupled activity/tension systems."""
from .expr import compile_expr, compile_source, parse, to_source
from .model import ModelSpec, validate_model
from .pde import GridSpec, RunRecord, SimParams, State, simulate

__all__ = ["compile_expr", "compile_source", "parse", "to_source", "ModelSpec", "validate_model",
           "GridSpec", "RunRecord", "SimParams", "State", "simulate"]
__version__ = "0.1.0"
