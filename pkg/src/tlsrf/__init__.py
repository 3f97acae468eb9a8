"""Resonance fluorescence of a single two-level emitter under coherent
or chaotic drive: Bloch dynamics, emission spectra, photon correlations
and time-tag Monte Carlo."""

from . import bloch, core, emission, lamp, photonstat, trajectory
from ._accel import HAVE_NUMBA, USE_NUMBA
from .core import (
    BUILTIN_SETS,
    PAPER_QD,
    DrivePulse,
    InstrumentResponse,
    ParameterSet,
    Statistics,
    TlsParams,
    load_registry,
    omega_from_saturation,
    power_linewidth,
    saturation_parameter,
    stream,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_SETS",
    "DrivePulse",
    "HAVE_NUMBA",
    "InstrumentResponse",
    "PAPER_QD",
    "ParameterSet",
    "Statistics",
    "TlsParams",
    "USE_NUMBA",
    "bloch",
    "core",
    "emission",
    "lamp",
    "load_registry",
    "omega_from_saturation",
    "photonstat",
    "power_linewidth",
    "saturation_parameter",
    "stream",
    "trajectory",
]
