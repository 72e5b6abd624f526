"""Non-Markovian quantum thermometry with a bosonic probe mode.

Submodules:

- ``spectral``: spectral density, memory kernel, Lamb shift, bound state
- ``dynamics``: propagator ``u(t)``, noise ``v(t)``, heat-exchange spectrum
- ``metrology``: Gaussian-state QFI, Markovian QFI, photon-counting CFI
- ``steady``: long-time spectrum, steady QFI, upper bound, peak law
- ``oracle``: discretised-reservoir exact diagonalisation
- ``cli``: the ``nmtherm`` command
"""
__version__ = "0.1.0"

from .spectral import BoundState, DomainError, SolverError, SpectralDensity, Temperature
from .grids import FrequencyGrid, TimeGrid

__all__ = ["BoundState", "DomainError", "FrequencyGrid", "SolverError",
           "SpectralDensity", "Temperature", "TimeGrid", "__version__"]
