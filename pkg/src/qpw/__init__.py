"""Qutrit parametric workbench.

Simulation and compilation toolkit for flux-driven two-qutrit gates in a
three-transmon circuit (two fixed-frequency data transmons, one tunable
coupler): circuit quantization, perturbative dressed frames, parametric-drive
propagation, gate calibration, and decomposition of the qutrit CZ into
iSWAP-type exchange rotations plus single-qutrit subspace rotations.
"""

__version__ = "0.1.0"
