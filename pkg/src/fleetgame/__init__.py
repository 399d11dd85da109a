"""Modular vs. conventional fleet competition: simulation, tree mining and stage-game equilibria."""

__version__ = "0.1.0"
