"""Joint remaining-useful-life and failure-prediction models for predictive maintenance."""

__version__ = "0.1.0"
