"""Hadamard rotations, clipping-ratio search and low-bit quantization."""

from ._rotquant import (
    ArgumentError,
    ConfigError,
    ConstructionError,
    DataError,
    Error,
    IntegrityError,
    IoError,
    ShapeError,
    SizeError,
    ToyModel,
    UnsupportedOrderError,
    bitops,
    exact_recipe,
    expand_and_fuse,
    expansion_limit,
    find_constructible_order,
    fht,
    hadamard,
    max_abs_after,
    plan_expansion,
    quantize,
    reduction_sweep,
    sample_orthogonal,
    search_synthetic,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "ConstructionError",
    "DataError",
    "Error",
    "IntegrityError",
    "IoError",
    "ShapeError",
    "SizeError",
    "ToyModel",
    "UnsupportedOrderError",
    "bitops",
    "exact_recipe",
    "expand_and_fuse",
    "expansion_limit",
    "find_constructible_order",
    "fht",
    "hadamard",
    "max_abs_after",
    "plan_expansion",
    "quantize",
    "reduction_sweep",
    "sample_orthogonal",
    "search_synthetic",
]
