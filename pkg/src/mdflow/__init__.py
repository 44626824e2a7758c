"""Mixed-dimensional flow and tracer transport in fractured porous media."""

__version__ = "0.1.0"
