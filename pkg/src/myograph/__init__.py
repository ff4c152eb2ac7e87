"""sEMG muscle-fatigue analysis."""
__version__ = "0.1.0"
