"""Truncated composite quadrature grids and symmetrized Nystrom matrices.

A kernel K on [0, X]^2 becomes the matrix sqrt(w_i) K(x_i, x_j) sqrt(w_j)
over composite Gauss-Legendre nodes; the similarity with K W preserves the
Nystrom spectrum while keeping hermitian structure explicit.

psi entering the Green kernel can come from two sources:

  psi_source="exact"       adaptive log-space quadrature (spectral work);
  psi_source="quadrature"  the grid's own prefix sums of w phi^-2, which
                           makes the assembled Green matrix equal to
                           M^T M for the assembled factor matrix exactly,
                           so factorization checks close at roundoff level.

The second source aligns the diagonal kink with the grid by construction;
its node values are only O(panel) accurate, so it is never used for
eigenvalue work.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InvalidParameterError,
    NoDecayDetectedError,
    NonHermitianError,
    SlowDecayWarning,
)
from .green_kernel import KernelKind
from .lse_quad import DEFAULT_RTOL, gauss_legendre
from .phi_models import PhiModel, PhiSpec, make_phi
from .subordinate import SubordinateCache

CONVERGED_REL = 1e-6  # operational convergence threshold for sweeps


@dataclass(frozen=True)
class Quadrature:
    """Composite Gauss-Legendre grid with equal panels on [0, X]."""

    X: float
    panels: int
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size

    def same_grid(self, other: "Quadrature") -> bool:
        return (self.n == other.n and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.weights, other.weights))


def build_quadrature(X: float, panels: int, order: int) -> Quadrature:
    """Equal composite panels; exact for polynomials up to degree 2*order-1
    per panel, and sum(weights) == X by exactness on constants."""
    if X <= 0 or panels < 1 or order < 2:
        raise InvalidParameterError("need X > 0, panels >= 1, order >= 2")
    gx, gw = gauss_legendre(order)
    edges = np.linspace(0.0, X, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (X / panels)
    nodes = (mid + half * gx[None, :]).ravel()
    weights = np.tile(gw * half, panels)
    return Quadrature(float(X), int(panels), int(order), nodes, weights)


def default_quadrature(model: PhiModel, X: float, order: int = 10,
                       panels: Optional[int] = None) -> Quadrature:
    """Default resolution: panels = max(40, ceil(4 X))."""
    if panels is None:
        panels = max(40, int(np.ceil(4.0 * X)))
    return build_quadrature(X, panels, order)


def auto_truncation(model: PhiModel, eps: float) -> float:
    """Smallest grid-searched X with phi(X)/max phi <= eps and, when decay
    metadata exists, tail mass int_X^inf phi^2 <= eps^2 ||phi||^2.

    Sub-exponential profiles that only satisfy the ratio condition far out
    trigger SlowDecayWarning; if the ratio never drops below eps inside the
    search window, NoDecayDetectedError is raised.
    """
    if not (0.0 < eps < 1.0):
        raise InvalidParameterError("eps must lie in (0, 1)")
    lin = np.arange(0.0125, 200.0, 0.0125)
    geo = np.geomspace(200.0, 1.0e8, 1200)
    for cands in (lin, geo):
        lp = model.log_phi(cands)
        lp0 = float(model.log_phi(np.asarray(0.0)))
        runmax = np.maximum.accumulate(np.maximum(lp, lp0))
        ok = (lp - runmax) <= np.log(eps)
        if model.decay is not None:
            sig = np.asarray(model.decay.sigma(cands), dtype=float)
            tail = model.decay.c_upper**2 * np.exp(-2.0 * sig) / (2.0 * model.decay.rate)
            ok &= tail <= (eps * model.l2_norm_phi) ** 2
        hits = np.nonzero(ok)[0]
        if hits.size:
            X = float(cands[hits[0]])
            if X > 1000.0:
                warnings.warn(
                    f"{model.label}: truncation at X={X:.4g} (sub-exponential decay)",
                    SlowDecayWarning, stacklevel=2)
            return X
    raise NoDecayDetectedError(
        f"{model.label} never fell below eps={eps:g} within the search window")


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetrized Nystrom matrix sqrt(w) K sqrt(w) on a quadrature grid."""

    entries: np.ndarray
    kind: KernelKind
    quad: Quadrature
    hermitian: bool
    model_label: str
    psi_source: str = "exact"

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def unweighted(self) -> np.ndarray:
        """Plain kernel samples K(x_i, x_j) with the weight scaling removed."""
        rw = 1.0 / np.sqrt(self.quad.weights)
        return self.entries * np.outer(rw, rw)

    def apply_to_function(self, values: np.ndarray) -> np.ndarray:
        """(K f)(x_i) = sum_j w_j K(x_i, x_j) f(x_j) for node samples f."""
        sw = np.sqrt(self.quad.weights)
        return (self.entries @ (sw * values)) / sw


def _grid_log_psi(model: PhiModel, quad: Quadrature) -> np.ndarray:
    # prefix sums of the grid's own w phi^-2, in log space
    lp = model.log_phi(quad.nodes)
    terms = np.log(quad.weights) - 2.0 * lp
    return lp + np.logaddexp.accumulate(terms)


def assemble_kernel(model: Optional[PhiModel], quad: Quadrature, kind: KernelKind,
                    rtol: float = DEFAULT_RTOL, psi_source: str = "exact",
                    cache: Optional[SubordinateCache] = None) -> KernelMatrix:
    """Build sqrt(w) K(x_i, x_j) sqrt(w) for the requested kernel kind.

    A prebuilt SubordinateCache on the same nodes may be passed to avoid
    re-integrating psi across several kinds on one grid.
    """
    if kind.variant == "free":
        model = make_phi(PhiSpec.exp_decay(kind.c0))
    if model is None:
        raise InvalidParameterError("a model is required for this kernel kind")
    nodes = quad.nodes
    log_phi = model.log_phi(nodes)

    if kind.variant in ("dirichlet", "free", "robin"):
        if psi_source == "exact":
            if cache is None:
                cache = SubordinateCache(model, nodes, rtol=rtol)
            log_psi = cache.log_psi_nodes
        elif psi_source == "quadrature":
            log_psi = _grid_log_psi(model, quad)
        else:
            raise InvalidParameterError(f"unknown psi_source '{psi_source}'")
        K = np.exp(np.add.outer(log_phi, log_psi))  # phi_i psi_j, valid for j <= i
        low = np.tril(K)
        K = low + np.tril(K, -1).T
        if kind.variant == "robin":
            phi = np.exp(log_phi)
            gamma = complex(kind.gamma)
            if gamma.imag == 0.0:
                K = K + gamma.real * np.outer(phi, phi)
            else:
                K = K.astype(complex) + gamma * np.outer(phi, phi)
    elif kind.variant == "factor-M":
        K = np.triu(np.exp(np.subtract.outer(-log_phi, -log_phi)))
    elif kind.variant == "factor-L":
        K = np.tril(np.exp(np.subtract.outer(log_phi, log_phi)))
    else:  # pragma: no cover - guarded in KernelKind
        raise InvalidParameterError(kind.variant)

    sw = np.sqrt(quad.weights)
    entries = K * np.outer(sw, sw)
    return KernelMatrix(entries=entries, kind=kind, quad=quad,
                        hermitian=kind.hermitian, model_label=model.label,
                        psi_source=psi_source)


def kink_bias_estimate(quad: Quadrature) -> float:
    """Leading uniform eigenvalue bias of Green-kernel Nystrom on this grid.

    The kernel has slope jump 1 across the diagonal (Wronskian), so every
    diagonal panel cell mis-integrates -|x - y|/2 by the same reference
    constant; top eigenvalues shift together by about this amount.  Purely a
    diagnostic: matrices are never corrected (that would break the exact
    Gram positivity of the sampled kernel).
    """
    gx, gw = gauss_legendre(quad.order)
    u = 0.5 * (gx + 1.0)
    wu = 0.5 * gw
    cell_err = float(np.einsum("i,j,ij->", wu, wu, np.abs(u[:, None] - u[None, :]))) - 1.0 / 3.0
    h = quad.X / quad.panels
    return -0.5 * cell_err * h * h


def operator_norm(K: KernelMatrix, tol: float = 1e-10) -> float:
    """Largest |eigenvalue| of a hermitian kernel matrix."""
    if not K.hermitian:
        raise NonHermitianError("operator_norm needs a hermitian matrix")
    A = K.entries
    if K.n <= 1200:
        return float(np.max(np.abs(np.linalg.eigvalsh(A))))
    from scipy.sparse.linalg import eigsh
    vals = eigsh(A, k=1, which="LM", tol=tol, return_eigenvectors=False)
    return float(abs(vals[0]))


@dataclass(frozen=True)
class SweepRow:
    X: float
    N: int
    mu: np.ndarray
    rel_change: float  # vs the previous row, nan for the first


@dataclass(frozen=True)
class SweepResult:
    rows: list
    converged: bool
    final_rel_change: float

    def table(self):
        return [(r.X, r.N, r.mu, r.rel_change) for r in self.rows]


def _rel_diff(a: np.ndarray, b: np.ndarray) -> float:
    m = min(a.size, b.size)
    if m == 0:
        return np.nan
    denom = np.maximum(np.abs(b[:m]), 1e-300)
    return float(np.max(np.abs(a[:m] - b[:m]) / denom))


def convergence_sweep(model: PhiModel, kind: KernelKind,
                      X_list: Sequence[float], N_list: Sequence[int],
                      n_keep: int = 10, order: int = 10,
                      rtol: float = DEFAULT_RTOL) -> SweepResult:
    """Top-k eigenvalues over the (X, N) grid with successive differences.

    Convergence is declared when the final cell moves less than CONVERGED_REL
    relatively against both the (X_last, N_prev) and (X_prev, N_last) cells.
    A single cell yields converged=False (no refinement to compare).
    """
    from .spectral import eigen_mu  # deferred: spectral depends on this module

    X_list = list(X_list)
    N_list = list(N_list)
    if not X_list or not N_list:
        raise InvalidParameterError("X_list and N_list must be nonempty")
    rows = []
    cells = {}
    prev_mu = None
    for X in X_list:
        for N in N_list:
            panels = max(1, int(np.ceil(N / order)))
            quad = build_quadrature(X, panels, order)
            K = assemble_kernel(model, quad, kind, rtol=rtol)
            mu = eigen_mu(K, n_keep).mu
            rel = np.nan if prev_mu is None else _rel_diff(mu, prev_mu)
            rows.append(SweepRow(X=float(X), N=quad.n, mu=mu, rel_change=rel))
            cells[(X, N)] = mu
            prev_mu = mu
    final = cells[(X_list[-1], N_list[-1])]
    checks = []
    if len(N_list) > 1:
        checks.append(_rel_diff(final, cells[(X_list[-1], N_list[-2])]))
    if len(X_list) > 1:
        checks.append(_rel_diff(final, cells[(X_list[-2], N_list[-1])]))
    final_rel = max(checks) if checks else np.nan
    converged = bool(checks) and final_rel < CONVERGED_REL
    return SweepResult(rows=rows, converged=converged, final_rel_change=final_rel)


def matrix_to_csv(K: KernelMatrix, path) -> None:
    """Row-major full-precision dump for external inspection.

    Complex entries (complex-gamma Robin kernels) are written as
    'a+bj' literals that python's complex() parses back.
    """
    is_complex = np.iscomplexobj(K.entries)

    def fmt(v):
        if is_complex:
            return f"{v.real:.17g}{v.imag:+.17g}j"
        return format(v, ".17g")

    with open(path, "w") as fh:
        for row in np.atleast_2d(K.entries):
            fh.write(",".join(fmt(v) for v in row) + "\n")
