"""Simulator for online differentially private query answering shared by several analysts."""

__version__ = "0.1.0"
