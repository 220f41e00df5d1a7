"""Kinetic-to-fluid toolkit for the two-species Vlasov-Maxwell-Boltzmann system."""

__version__ = "0.1.0"
