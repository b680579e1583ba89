"""Perturbed twist maps of the cylinder and their Finsler geodesic realisation."""

__version__ = "0.1.0"
