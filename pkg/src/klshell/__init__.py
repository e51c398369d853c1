"""Isogeometric Kirchhoff-Love shell solver based on H1-conforming mixed formulations."""

__version__ = "0.1.0"
