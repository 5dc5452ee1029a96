"""Compositional text-to-image benchmark builder and VQA evaluation harness."""

__version__ = "0.1.0"
