"""Quasinormal modes of coupled lossy microdisks and their Purcell spectra.

Submodules
----------
special      cylinder functions with envelope checks and a high-precision reference
disk         bare whispering-gallery QNMs of a single 2D disk
cqt          coupled QNM theory: overlaps, couplings, hybrid modes
greens       two-mode Green function expansions
purcell      classical Purcell factors and spectrum sweeps
quantum      quantized-QNM overlap matrices, rates and dissipator parameters
improved_nm  improved normal-mode model, classical and quantum
dynamics     Lindblad evolution of the emitter plus two quantized modes
oracle       multiple-scattering Green function of one or two cylinders
cli          command-line driver
"""

from .units import C_LIGHT

__all__ = ["C_LIGHT"]
__version__ = "0.1.0"
