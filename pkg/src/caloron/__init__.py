"""Numerical Nahm transform for calorons.

From Nahm data on a circle (piecewise-Chebyshev matrix functions with
boundary matrices at marked points) to the gauge potential and curvature
of the corresponding finite-temperature instanton, via ODE monodromies
and Green's functions of the associated operators.
"""

from .errors import (CaloronError, ConfigError, IntegrationError,
                     IrregularPointError, PositivityError)
from .nahm import NahmData, from_dict, load, to_dict

__version__ = "0.1.0"

__all__ = [
    "CaloronError", "ConfigError", "IntegrationError", "IrregularPointError",
    "PositivityError", "NahmData", "from_dict", "load", "to_dict",
    "__version__",
]
