"""Probabilistic customer-base analysis: Pareto/NBD family and Gamma-Gamma
spending models with simulation, prediction and bootstrap utilities."""

from ._clv import (  # noqa: F401
    Dataset,
    FitResult,
    InputError,
    NumericalError,
    UsageError,
    __version__,
    bootstrap_params,
    discount_per_unit,
    fit,
    fit_from_json,
    ingest,
    predict,
    simulate,
)

__all__ = [
    "Dataset",
    "FitResult",
    "InputError",
    "NumericalError",
    "UsageError",
    "bootstrap_params",
    "discount_per_unit",
    "fit",
    "fit_from_json",
    "ingest",
    "predict",
    "simulate",
]
