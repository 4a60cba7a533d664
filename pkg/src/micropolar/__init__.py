"""Pseudo-spectral solver for the mollified micropolar system on the 3-torus,
with numerical audits of its energy balances and Sobolev estimates."""

from .spectral import GridSpec, SobolevIndex, SpectralField, VectorField
from .rhs import State, SystemParams
from .integrator import BlowUpError, EnergyLedger, StepPolicy, Trajectory, imex_step, simulate
from .datagen import ICRecipe, make_angular_ic, make_velocity_ic

__all__ = [
    "GridSpec",
    "SobolevIndex",
    "SpectralField",
    "VectorField",
    "State",
    "SystemParams",
    "BlowUpError",
    "EnergyLedger",
    "StepPolicy",
    "Trajectory",
    "imex_step",
    "simulate",
    "ICRecipe",
    "make_angular_ic",
    "make_velocity_ic",
]
