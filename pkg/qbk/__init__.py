"""Quantified Belnapian modal logic: syntax, Kripke semantics, a Hilbert proof checker and the Nelson embedding."""

__version__ = "0.1.0"
