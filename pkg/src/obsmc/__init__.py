"""Stateless model checking by observation equivalence classes."""

__version__ = "0.1.0"
