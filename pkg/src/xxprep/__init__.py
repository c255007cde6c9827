"""Simulator for phonon-assisted two-photon biexciton preparation."""

__version__ = "0.1.0"

from .model import (
    DotParameters,
    DressedSpectrum,
    MaterialParams,
    PhononBath,
    PulseSpec,
    dressed_states,
    envelope,
    pulse_area_axis,
    rotating_frame_hamiltonian,
    spectral_density,
)
from .pathint import TimeGrid, bath_correlation, compute_kernel, final_occupations, propagate

__all__ = [
    "DotParameters",
    "DressedSpectrum",
    "MaterialParams",
    "PhononBath",
    "PulseSpec",
    "TimeGrid",
    "bath_correlation",
    "compute_kernel",
    "dressed_states",
    "envelope",
    "final_occupations",
    "propagate",
    "pulse_area_axis",
    "rotating_frame_hamiltonian",
    "spectral_density",
]
