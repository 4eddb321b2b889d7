"""Two-party interior-point method for box LPs, min-cost flow and max flow."""

__version__ = "0.1.0"
