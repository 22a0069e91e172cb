"""Simulation and Bayesian evaluation of network sampling designs."""

__version__ = "0.1.0"
