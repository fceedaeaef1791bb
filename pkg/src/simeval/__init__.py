"""Simulation of recommender data collection and offline evaluation error."""

__version__ = "0.1.0"
