"""Deterministic float64 CNN training/inference with attentive response maps."""

__version__ = "0.1.0"
