"""Simulation and analysis of a counterpropagating-SPDC polarization-entangled source.

Modules: ``qstate`` (two-qubit algebra and metrics), ``source`` (phase
matching, pump overlap, rate budget), ``counting`` (simulated tomography
counts), ``tomography`` (reconstruction) and ``cli``.
"""

__version__ = "0.1.0"
