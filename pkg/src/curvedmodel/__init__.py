"""Functional models, cascade products and regular factorizations over perturbed-disk curves.

The curve is ``C = phi(T)`` with ``phi(z) = z + epsilon z^2`` (``|epsilon| < 1/2``).
Modules:

- ``coeffspace``: curve, coefficient fields, weights, Riesz split and quadrature
- ``schur``: weighted Schur functions, n-characteristic functions, regularity
- ``system``: conservative curved systems, cascade products, similarity
- ``nmodel``: discrete n-models, projection algebra, model systems
- ``factorization``: invariant chains, the factorization lattice, contraction triples
- ``fixtures``: worked examples and random generators
- ``commands`` / ``cli``: command-line operations
"""

from . import coeffspace, commands, config, factorization, fixtures, nmodel, schur, system
from .coeffspace import *  # noqa: F401,F403
from .config import DEFAULT_TOL, ModelOrders, RunConfig, Tolerances
from .factorization import *  # noqa: F401,F403
from .fixtures import *  # noqa: F401,F403
from .nmodel import *  # noqa: F401,F403
from .schur import *  # noqa: F401,F403
from .system import *  # noqa: F401,F403

__version__ = "0.1.0"

__all__ = (
    ["DEFAULT_TOL", "ModelOrders", "RunConfig", "Tolerances", "__version__"]
    + coeffspace.__all__ + schur.__all__ + system.__all__ + nmodel.__all__
    + factorization.__all__ + fixtures.__all__
)
