"""Numerical checks for Hofer lengths of Lagrangian loops in CP^n and the flat torus.

Subpackages and modules:

- ``symplin``: Lagrangian frames and Maslov indices.
- ``cpn``: Fubini-Study geometry, the loop family and Hofer lengths.
- ``connection``: Hamiltonian connections, curvature, K-area and pairings.
- ``sections``: Cauchy-Riemann residuals, energies and taming.
- ``torus``: translation loops, serpentine discs, Moser isotopies.
- ``cli``: command-line driver and reports.
"""

from . import connection, cpn, sections, symplin, torus
from .errors import HoferlabError

__version__ = "0.1.0"

__all__ = ["connection", "cpn", "sections", "symplin", "torus", "HoferlabError", "__version__"]
