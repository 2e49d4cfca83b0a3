"""Selective state-space image classifiers and progressive knowledge distillation."""

__version__ = "0.1.0"
