"""Renewal structure of self-avoiding walks on the hypercubic lattice.

Exact enumeration of walks, bridges, and irreducible bridges; calibration
of the tilted irreducible step law; exact conditioned sampling of
regeneration skeletons; and statistical checks of the Brownian-bridge
scaling limit.
"""

__version__ = "0.1.0"
