"""Predicting shift-level OEE of wire-cutting machines with SVR, tree ensembles and a small MLP."""

__version__ = "0.1.0"
