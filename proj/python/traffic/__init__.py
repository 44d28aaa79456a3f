"""Density classification and junction simulation, backed by the C++ core."""

from ._core import (
    DENSITY_CLASSES,
    Model,
    Scenario,
    apply_mask,
    class_weights,
    classify_count,
    evaluate,
    load_image,
    simulate,
)

__all__ = [
    "DENSITY_CLASSES",
    "Model",
    "Scenario",
    "apply_mask",
    "class_weights",
    "classify_count",
    "evaluate",
    "load_image",
    "simulate",
]
