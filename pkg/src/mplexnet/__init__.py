"""Multiplexed-graph multimodal fusion for outcome classification."""

__version__ = "0.1.0"
