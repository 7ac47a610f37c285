"""Exciton-phonon dynamics with power-law exciton transfer: lattice and continuum solvers."""

__version__ = "0.1.0"
