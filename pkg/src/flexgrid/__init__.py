"""Hierarchical dispatch of a distribution network with community
integrated energy systems providing priced flexibility services."""

__version__ = "0.1.0"
