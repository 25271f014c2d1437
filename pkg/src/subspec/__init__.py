"""Half-line Schrodinger operators built from a positive profile phi.

The submodules follow the pipeline:

    phi_models      profiles phi, decay metadata, L2 norms
    subordinate     the companion solution psi, xi, D, regularized potential
    green_kernel    pointwise Dirichlet/Robin/factor kernels and bounds
    discretization  quadrature grids and symmetrized Nystrom matrices
    spectral        eigenvalues, comparisons, growth fits, form residuals
    scattering      trace-norm criteria for phi = exp(-c x - zeta)
    oracle_fd       independent finite-difference reference solver
    cli             config-driven command line front end

Imports here are lazy so the CLI can pin BLAS thread counts before numpy
loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "cli",
    "discretization",
    "errors",
    "green_kernel",
    "lse_quad",
    "oracle_fd",
    "phi_models",
    "scattering",
    "spectral",
    "subordinate",
)


def __getattr__(name):
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
