"""Multistatic OFDM radar simulation and coherent SAR processing."""

from .signal import C0, ComplexSignal
from .waveform import OfdmParams, generate_code, generate_symbol
from .scene import PointTarget, Scene, Trajectory

__version__ = "0.1.0"

__all__ = [
    "C0",
    "ComplexSignal",
    "OfdmParams",
    "PointTarget",
    "Scene",
    "Trajectory",
    "generate_code",
    "generate_symbol",
]
