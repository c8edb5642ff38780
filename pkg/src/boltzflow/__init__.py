"""Flow-based Boltzmann sampling with Moser-transport and Wasserstein validation."""

__version__ = "0.1.0"
