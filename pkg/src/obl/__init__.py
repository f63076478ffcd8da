"""Exact and sampled off-belief learning for small turn-based Dec-POMDPs."""

__version__ = "0.1.0"
