"""EMT simulation of a grid-following inverter with trapezoidal companion models."""
__version__ = "0.1.0"
