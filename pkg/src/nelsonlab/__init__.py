"""Truncated Fock-space laboratory for a translation-invariant electron-boson model."""

__version__ = "0.1.0"
