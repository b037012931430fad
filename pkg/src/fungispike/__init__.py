"""Spike detection and complexity analysis for multi-channel fungal electrophysiology."""

__version__ = "0.1.0"
