"""Small-polaron formation after an excitation-phonon interaction quench.

Exact diagonalization and Chebyshev time evolution of a 1D lattice model
with Peierls and breathing-mode couplings, restricted to fixed total
quasimomentum.
"""

__version__ = "0.1.0"

from .model import DeviceParams, ModelParams, derive_model, vertex  # noqa: E402,F401
from .fockspace import KSector, enumerate_basis  # noqa: E402,F401
from .hamiltonian import build_sector  # noqa: E402,F401
