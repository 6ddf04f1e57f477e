"""Bijective surface correspondence by Ginzburg-Landau minimization on A x B."""

from .errors import ExtractionError, ImsError, InputError, NumericalError, TopologyError

__version__ = "0.1.0"

__all__ = ["ExtractionError", "ImsError", "InputError", "NumericalError", "TopologyError", "__version__"]
