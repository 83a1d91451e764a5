"""Density-matrix simulation of single-Lambda and wave-mixing NMOR magnetometry.

The pipeline runs scheme -> field waveform -> master-equation dynamics ->
polarimeter optics -> instrument noise and spectra -> analysis, driven by
scenario files (see :mod:`nmorsim.scenarios`).
"""

__version__ = "0.1.0"
