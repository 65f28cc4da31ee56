"""Simulated bedside assistant: overhead-camera path planning, bed load-cell
pose sensing, a tilt-controlled nightstand and the radio link between them."""

__version__ = "0.1.0"
