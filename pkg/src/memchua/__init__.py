"""Memristive Chua oscillator lab: simulation, chaos diagnostics, small-signal checks and a chaos-driven TRNG."""

__version__ = "0.1.0"
