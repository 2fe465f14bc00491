"""Robustness benchmarking of small CNN and capsule classifiers under image degradations."""

__version__ = "0.1.0"
