"""Optimal sustainable intergenerational insurance in an OLG economy."""

__version__ = "0.1.0"
