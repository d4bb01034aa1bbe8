"""Quantum Otto cycle with a trapped, interacting Bose-Einstein condensate."""

__version__ = "0.1.0"
