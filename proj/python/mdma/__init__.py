"""Marginalizable density models with closed-form marginals and conditionals."""

from ._mdma import (
    InvalidArgument,
    Model,
    NumericalError,
    anomaly_scores,
    ci_test,
    load_csv,
    make_toy,
    mutual_information,
)

__all__ = [
    "InvalidArgument",
    "Model",
    "NumericalError",
    "anomaly_scores",
    "ci_test",
    "load_csv",
    "make_toy",
    "mutual_information",
]
