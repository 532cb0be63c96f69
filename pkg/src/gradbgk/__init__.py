"""Solver for arbitrary-order Grad and regularized moment equations of the
Boltzmann-BGK model, with a discrete-velocity reference solver and scenario
harness for shock-tube, smooth-wave, shock-bubble and periodic 2-D runs."""

__version__ = "0.1.0"
