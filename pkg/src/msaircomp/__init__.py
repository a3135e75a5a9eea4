"""Multi-slot over-the-air computation: analytics and Monte Carlo."""

__version__ = "0.1.0"
