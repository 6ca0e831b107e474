"""Adaptive random testing with incremental q-gram aggregation."""

__version__ = "0.1.0"
