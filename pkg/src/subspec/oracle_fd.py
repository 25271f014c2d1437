"""Independent finite-difference Schrodinger solver.

For smooth phi = exp(-sigma) the classical potential V = phi''/phi =
(sigma')^2 - sigma'' exists and the operator can be diagonalized on a
uniform grid with the 3-point stencil.  This path shares no code with the
Nystrom route (different grid, different operator, different solver), which
is exactly what makes it usable as ground truth for the Green-kernel
spectra.  It is restricted to smooth confining potentials: the oscillatory
regime where only the Green route works is out of its scope by design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import InvalidParameterError, NonSmoothModelError, NotCompactError
from .phi_models import PhiModel


@dataclass(frozen=True)
class RobinBC:
    """g'(0) = sigma g(0), discretized by ghost-point elimination."""

    sigma: float


@dataclass(frozen=True)
class FDProblem:
    potential: Callable[[np.ndarray], np.ndarray]
    X: float
    N: int
    bc0: Union[str, RobinBC] = "dirichlet"  # bcX is always Dirichlet

    def __post_init__(self):
        if self.N < 16 or self.X <= 0:
            raise InvalidParameterError("need N >= 16 and X > 0")


def potential_from_phi(model: PhiModel, x) -> np.ndarray:
    """V(x) = (sigma')^2 - sigma'' for sigma = -log phi, i.e.
    (log phi')^2 + (log phi)''; analytic for the smooth built-ins."""
    if model.dlog_phi is None or model.d2log_phi is None:
        raise NonSmoothModelError(f"{model.label} has no classical potential")
    arr = np.asarray(x, dtype=float)
    out = model.dlog_phi(arr) ** 2 + model.d2log_phi(arr)
    return out if out.ndim else float(out)


def fd_eigenvalues(p: FDProblem, k: int) -> np.ndarray:
    """Lowest k eigenvalues of the 3-point discretization.

    Dirichlet at both ends uses interior nodes i*dx, i = 1..N with
    dx = X/(N+1).  A Robin condition at 0 keeps the boundary node, eliminates
    the ghost value through (g_1 - g_-1)/(2 dx) = sigma g_0 and restores
    symmetry by the sqrt(2) similarity scaling of the first component;
    both variants are second-order accurate.
    """
    dx = p.X / (p.N + 1)
    if isinstance(p.bc0, RobinBC):
        x = dx * np.arange(0, p.N + 1)
        diag = 2.0 / dx**2 + np.asarray(p.potential(x), dtype=float)
        diag[0] += 2.0 * p.bc0.sigma / dx
        off = np.full(p.N, -1.0 / dx**2)
        off[0] *= math.sqrt(2.0)
    else:
        if p.bc0 != "dirichlet":
            raise InvalidParameterError(f"unknown boundary condition {p.bc0!r}")
        x = dx * np.arange(1, p.N + 1)
        diag = 2.0 / dx**2 + np.asarray(p.potential(x), dtype=float)
        off = np.full(p.N - 1, -1.0 / dx**2)
    k = min(int(k), diag.size)
    vals = eigh_tridiagonal(diag, off, select="i",
                            select_range=(0, k - 1), eigvals_only=True)
    return np.asarray(vals, dtype=float)


def _require_compact(model: PhiModel) -> None:
    # confining check: V well above its near-origin values on a far window
    V_near = np.max(np.asarray(potential_from_phi(model, np.linspace(0.0, 1.0, 21))))
    V_far = np.min(np.asarray(potential_from_phi(model, np.linspace(20.0, 40.0, 121))))
    if not V_far >= V_near + 10.0:
        raise NotCompactError(
            f"{model.label}: potential does not confine, spectrum is not discrete")


def turning_point(model: PhiModel, level: float, x_max: float = 200.0) -> float:
    """Smallest x beyond which V stays above `level` (bisection on a scan)."""
    xs = np.linspace(0.0, x_max, 4001)
    V = np.asarray(potential_from_phi(model, xs))
    below = np.nonzero(V < level)[0]
    if below.size == 0:
        return 0.0
    if below[-1] == xs.size - 1:
        raise InvalidParameterError(f"V never exceeds {level} before x={x_max}")
    return float(xs[below[-1] + 1])


@dataclass(frozen=True)
class CrossValidation:
    max_rel_err: float
    lam_green: np.ndarray
    lam_fd: np.ndarray


def cross_validate(model: PhiModel, k: int, fd_N: int = 4000,
                   order: int = 10) -> CrossValidation:
    """Lowest k eigenvalues from the Green route against the FD oracle.

    Both routes solve the same operator exactly when phi = exp(-sigma) is
    smooth, since then V = (sigma')^2 - sigma'' identically.  The domains are
    chosen so V(X) exceeds lambda_k by a wide classically forbidden margin.
    """
    from .discretization import assemble_kernel, auto_truncation, build_quadrature
    from .green_kernel import KernelKind
    from .spectral import eigen_mu, lambdas

    _require_compact(model)
    # provisional FD pass to locate lambda_k, then a resolved one
    X_fd = turning_point(model, 50.0) + 2.0
    lam_fd = fd_eigenvalues(FDProblem(lambda x: potential_from_phi(model, x),
                                      X_fd, 1500), k)
    X_fd = turning_point(model, float(lam_fd[-1]) + 50.0) + 2.0
    lam_fd = fd_eigenvalues(FDProblem(lambda x: potential_from_phi(model, x),
                                      X_fd, fd_N), k)

    X_green = max(auto_truncation(model, 1e-6),
                  turning_point(model, float(lam_fd[-1])) + 2.0)
    panels = max(40, int(np.ceil(4.0 * X_green)))
    quad = build_quadrature(X_green, panels, order)
    K = assemble_kernel(model, quad, KernelKind("dirichlet"))
    res = eigen_mu(K, n_keep=max(2 * k, k + 8))
    lam_green = lambdas(res)[:k]
    if lam_green.size < k:
        raise InvalidParameterError("Green route produced too few eigenvalues")
    rel = np.abs(lam_green - lam_fd) / np.abs(lam_fd)
    return CrossValidation(max_rel_err=float(np.max(rel)),
                           lam_green=lam_green, lam_fd=lam_fd)
