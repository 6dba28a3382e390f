"""Thermoelectric mesh sensor toolkit.

Builds the boundary-voltage measurement model of a two-layer thermocouple
mesh with a resistive interlayer, characterizes its sensitivity and noise
metrics, recovers 1-sparse heat sources from boundary readings, and checks
the rare-event temporal-sparsity envelope.
"""

__version__ = "0.1.0"
