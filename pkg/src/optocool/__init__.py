"""Opto-electrical cooling of polar symmetric-top molecules.

Submodules: ``molphys`` (rotor and Stark structure), ``scheme`` (cooling
level scheme), ``ratesim`` (rate-equation cooling), ``trapsim`` (trap
trajectories and mixing), ``cli`` (command line).
"""
from .errors import ConfigError, DomainError, LabelingError, NumericError, StatisticsError, StepSizeError
from .molphys import MoleculeSpec, RotationalState, available_molecules, load_molecule

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "LabelingError", "NumericError", "StatisticsError", "StepSizeError",
    "MoleculeSpec", "RotationalState", "available_molecules", "load_molecule",
]
