"""Simulation and optimal control of NV-centre spin ensembles in zero static field."""

__version__ = "0.1.0"

from . import spin, geometry, fields, hamiltonians, propagation, experiments, grape  # noqa: E402,F401
