"""Pixel-wise crop classification from irregular satellite time series:
reconstruction, indices, trusted labels, separability, eleven classifiers,
transfer workflows, and a reproducible CLI."""

from .series import BAND_NAMES, ClassLabel, ObservationSeries, SarObservation, SeasonWindow, SpectralObservation
from .reconstruct import GRID_LN30, GRID_LN7, Method, RegularGrid, RegularSeries, SmootherConfig, WeightMode

__version__ = "0.1.0"

__all__ = [
    "BAND_NAMES",
    "ClassLabel",
    "GRID_LN30",
    "GRID_LN7",
    "Method",
    "ObservationSeries",
    "RegularGrid",
    "RegularSeries",
    "SarObservation",
    "SeasonWindow",
    "SmootherConfig",
    "SpectralObservation",
    "WeightMode",
    "__version__",
]
