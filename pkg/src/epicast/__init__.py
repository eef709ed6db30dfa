"""Ordinal hospitalization-trend forecasting from multi-modal prompts."""

__version__ = "0.1.0"
