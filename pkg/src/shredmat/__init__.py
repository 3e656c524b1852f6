"""Reconstruction of binary matrices from the multisets of their rows and columns."""

from .core import BitMatrix, SampleParams, ShreddedInstance, sample_matrix, shred
from .reconstruct import ReconstructConfig, ReconstructionResult, Tag, reconstruct

__all__ = [
    "BitMatrix",
    "ReconstructConfig",
    "ReconstructionResult",
    "SampleParams",
    "ShreddedInstance",
    "Tag",
    "reconstruct",
    "sample_matrix",
    "shred",
]
__version__ = "0.1.0"
