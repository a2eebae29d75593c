"""Simulation and verification toolkit for the simple random walk on
discrete point processes of Z^d."""

__version__ = "0.1.0"
