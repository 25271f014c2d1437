"""Eigenvalue extraction and the identity checks built on top of it.

mu denotes eigenvalues of a Green matrix in decreasing order; lambda = 1/mu
are the eigenvalues of the differential operator itself.  Values of mu below
1e3 * machine epsilon * ||G|| are discretization noise and never produce a
lambda.  "Converged" is operational: relative movement below CONVERGED_REL
under the final (X, N) doubling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .discretization import (
    CONVERGED_REL,
    KernelMatrix,
    Quadrature,
    assemble_kernel,
)
from .errors import (
    ComplexGammaError,
    InsufficientDataError,
    MismatchedLengthsError,
    NonHermitianError,
    NonPositiveMuError,
    NonSmoothModelError,
    ZeroGammaError,
)
from .green_kernel import KernelKind, robin as robin_kind
from .lse_quad import DEFAULT_RTOL
from .phi_models import PhiModel, eval_dlog_phi
from .subordinate import SubordinateCache

MU_NOISE_FACTOR = 1e3  # mu below this many eps * ||G|| carry no lambda


@dataclass(frozen=True)
class SpectralResult:
    """Descending mu of a Green matrix with the lambda = 1/mu view."""

    mu: np.ndarray
    lam: np.ndarray
    norm_estimate: float
    kind: Optional[KernelKind]
    provenance: dict = field(default_factory=dict)
    converged: Optional[np.ndarray] = None

    @property
    def mu_floor(self) -> float:
        return MU_NOISE_FACTOR * np.finfo(float).eps * self.norm_estimate


def _lam_from_mu(mu: np.ndarray, norm_estimate: float) -> np.ndarray:
    floor = MU_NOISE_FACTOR * np.finfo(float).eps * max(norm_estimate, 1e-300)
    keep = mu > floor
    return np.sort(1.0 / mu[keep])


def eigen_mu(K: KernelMatrix, n_keep: Optional[int] = None) -> SpectralResult:
    """Top n_keep eigenvalues (descending) of a hermitian kernel matrix;
    n_keep=None keeps the whole spectrum (negative Robin values included).

    Large positive-definite grids go through Lanczos for the top of the
    spectrum; everything else is a full symmetric eigensolve.
    """
    if not K.hermitian:
        raise NonHermitianError(
            "eigen-analysis needs a hermitian matrix (complex gamma is refused)")
    A = K.entries.real if np.iscomplexobj(K.entries) else K.entries
    n = A.shape[0]
    n_keep = n if n_keep is None else min(int(n_keep), n)
    psd_kind = K.kind.variant in ("dirichlet", "free")
    if n > 4096 and psd_kind and n_keep <= 64:
        from scipy.sparse.linalg import eigsh
        vals = eigsh(A, k=n_keep, which="LA", return_eigenvectors=False, tol=1e-12)
        mu = np.sort(vals)[::-1]
        norm = float(mu[0]) if mu.size else 0.0
    else:
        all_mu = np.sort(np.linalg.eigvalsh(A))[::-1]
        norm = float(np.max(np.abs(all_mu))) if all_mu.size else 0.0
        mu = all_mu[:n_keep]
    return SpectralResult(
        mu=mu, lam=_lam_from_mu(mu, norm), norm_estimate=norm, kind=K.kind,
        provenance={"model": K.model_label, "X": K.quad.X, "N": K.quad.n})


def lambdas(res: SpectralResult, tol: float = 1e-8) -> np.ndarray:
    """lambda_n = 1/mu_n ascending; all >= 1/norm_estimate - tol.

    For a positive kernel kind a significantly negative mu flags a failed
    discretization and raises.
    """
    if res.kind is not None and res.kind.variant in ("dirichlet", "free"):
        if np.any(res.mu < -res.mu_floor):
            raise NonPositiveMuError(
                f"negative mu = {float(np.min(res.mu)):.3e} for a positive kernel")
    return res.lam


@dataclass(frozen=True)
class ComparisonReport:
    c: float
    ratios: np.ndarray
    holds: bool
    worst_n: int  # 1-based index of the most extreme ratio
    band: tuple
    measured_band: tuple


def compare_spectra(res1: SpectralResult, res2: SpectralResult, c: float) -> ComparisonReport:
    """Check mu_{2,n} / mu_{1,n} in [c^-4, c^4] for two compact-case spectra."""
    if res1.mu.size != res2.mu.size:
        raise MismatchedLengthsError(
            f"spectra have {res1.mu.size} vs {res2.mu.size} entries")
    if c < 1.0:
        c = 1.0 / c
    usable = (res1.mu > res1.mu_floor) & (res2.mu > res2.mu_floor)
    ratios = np.full(res1.mu.size, np.nan)
    ratios[usable] = res2.mu[usable] / res1.mu[usable]
    lo, hi = c**-4, c**4
    vals = ratios[usable]
    holds = bool(np.all((vals >= lo) & (vals <= hi))) if vals.size else False
    if vals.size:
        worst = int(np.nanargmax(np.abs(np.log(np.where(usable, ratios, 1.0)))))
    else:
        worst = 0
    measured = (float(np.min(vals)), float(np.max(vals))) if vals.size else (np.nan, np.nan)
    return ComparisonReport(c=float(c), ratios=ratios, holds=holds,
                            worst_n=worst + 1, band=(lo, hi), measured_band=measured)


def growth_exponent(res, n_range: tuple) -> float:
    """Least-squares slope of log lambda_n against log n over n in n_range."""
    lam = res.lam if isinstance(res, SpectralResult) else np.asarray(res, dtype=float)
    lo, hi = int(n_range[0]), int(n_range[1])
    if lo < 1 or hi < lo:
        raise InsufficientDataError(f"bad n_range {n_range}")
    if lam.size < hi or hi - lo + 1 < 5:
        raise InsufficientDataError(
            f"need at least 5 lambdas covering n in [{lo}, {hi}], have {lam.size}")
    n = np.arange(lo, hi + 1, dtype=float)
    vals = lam[lo - 1: hi]
    if np.any(vals <= 0):
        raise InsufficientDataError("growth fit needs positive lambdas")
    slope = np.polyfit(np.log(n), np.log(vals), 1)[0]
    return float(slope)


def converged_mask(mu_fine: np.ndarray, mu_coarse: np.ndarray,
                   tol: float = CONVERGED_REL) -> np.ndarray:
    """Entrywise operational convergence between two refinements."""
    m = min(mu_fine.size, mu_coarse.size)
    out = np.zeros(mu_fine.size, dtype=bool)
    denom = np.maximum(np.abs(mu_fine[:m]), 1e-300)
    out[:m] = np.abs(mu_fine[:m] - mu_coarse[:m]) / denom < tol
    return out


def _extrapolate_to_zero(nodes: np.ndarray, values: np.ndarray) -> float:
    # quadratic through the three smallest nodes; the grid has no node at 0
    coef = np.polyfit(nodes[:3], values[:3], 2)
    return float(np.polyval(coef, 0.0))


def quadratic_form_residual(model: PhiModel, quad: Quadrature, f,
                            gamma: Optional[float] = None,
                            rtol: float = DEFAULT_RTOL,
                            cache: Optional[SubordinateCache] = None) -> float:
    """Relative defect of <f, G f> against the first-order form of H.

    With g = G f (or G_gamma f), compares f^T g to
    Q(g) = sum_i w_i ((g/phi)'(x_i))^2 phi(x_i)^2, the derivative taken by
    second-order differences on the grid, plus g(0)^2 / (gamma phi(0)^2) in
    the Robin case with g(0) extrapolated quadratically to the boundary.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != quad.nodes.shape:
        raise MismatchedLengthsError("f must be sampled on the quadrature nodes")
    if not np.any(f):
        return 0.0
    if gamma is not None:
        if gamma == 0:
            raise ZeroGammaError("gamma must be nonzero")
        if complex(gamma).imag != 0.0:
            raise ComplexGammaError("the quadratic form check needs real gamma")
        kind = robin_kind(float(gamma))
    else:
        kind = KernelKind("dirichlet")
    K = assemble_kernel(model, quad, kind, rtol=rtol, cache=cache)
    g = K.apply_to_function(f).real
    w = quad.weights
    fg = float(np.sum(w * f * g))
    if fg == 0.0:
        raise ZeroDivisionError("f^T G f vanished for a nonzero f")
    phi = np.exp(model.log_phi(quad.nodes))
    r = g / phi
    rp = np.gradient(r, quad.nodes)
    Q = float(np.sum(w * (phi * rp) ** 2))
    if gamma is not None:
        g0 = _extrapolate_to_zero(quad.nodes, g)
        phi0 = float(np.exp(model.log_phi(np.asarray(0.0))))
        Q += g0**2 / (float(gamma) * phi0**2)
    return abs(fg - Q) / abs(fg)


def smoothstep_quintic(x, x0: float):
    """h with h(0)=0, h=1 for x >= x0, exactly C^2: 6t^5 - 15t^4 + 10t^3."""
    t = np.clip(np.asarray(x, dtype=float) / x0, 0.0, 1.0)
    h = t**3 * (6.0 * t**2 - 15.0 * t + 10.0)
    hp = 30.0 * t**2 * (t - 1.0) ** 2 / x0
    hpp = 60.0 * t * (t - 1.0) * (2.0 * t - 1.0) / x0**2
    return h, hp, hpp


def weighted_identity_residual(model: PhiModel, quad: Quadrature, x0: float,
                               rtol: float = DEFAULT_RTOL,
                               cache: Optional[SubordinateCache] = None) -> float:
    """Defect of G(-phi h'' - 2 phi' h') = phi h for the quintic smoothstep.

    Relative max-norm error; the identity is exact, so the residual is pure
    discretization error.  x0 <= 0 means h == 0 and returns 0 (guarded 0/0).
    """
    if model.dlog_phi is None:
        raise NonSmoothModelError("weighted identity needs analytic phi'")
    if x0 is None or x0 <= 0.0:
        return 0.0
    nodes = quad.nodes
    h, hp, hpp = smoothstep_quintic(nodes, x0)
    phi = np.exp(model.log_phi(nodes))
    tau = model.dlog_phi(nodes)
    v = -phi * (hpp + 2.0 * tau * hp)
    K = assemble_kernel(model, quad, KernelKind("dirichlet"), rtol=rtol, cache=cache)
    lhs = K.apply_to_function(v)
    target = phi * h
    scale = float(np.max(np.abs(target)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(lhs - target)) / scale)


def robin_sigma(model: PhiModel, gamma: float) -> float:
    """sigma = phi'(0)/phi(0) + 1/(gamma phi(0)^2), the boundary slope in
    g'(0) = sigma g(0)."""
    if gamma == 0:
        raise ZeroGammaError("gamma must be nonzero")
    if model.dlog_phi is None:
        raise NonSmoothModelError("robin_sigma needs phi' continuous near 0")
    phi0 = float(np.exp(model.log_phi(np.asarray(0.0))))
    return float(eval_dlog_phi(model, 0.0)) + 1.0 / (float(gamma) * phi0**2)


def robin_spectrum(model: PhiModel, gamma: float, quad: Quadrature,
                   n_keep: Optional[int] = None, rtol: float = DEFAULT_RTOL,
                   cache: Optional[SubordinateCache] = None) -> SpectralResult:
    """Eigenvalues of the Robin kernel matrix; mu may be negative here."""
    if gamma == 0:
        raise ZeroGammaError("gamma must be nonzero")
    if complex(gamma).imag != 0.0:
        raise ComplexGammaError("spectral analysis is restricted to real gamma")
    K = assemble_kernel(model, quad, robin_kind(float(gamma)), rtol=rtol, cache=cache)
    return eigen_mu(K, n_keep)


def write_spectrum_csv(res: SpectralResult, path) -> None:
    """Columns n, mu, lambda, converged — full round-trip precision."""
    lam_desc = np.full(res.mu.size, np.nan)
    pos = res.mu > res.mu_floor
    lam_desc[pos] = 1.0 / res.mu[pos]
    conv = res.converged if res.converged is not None else np.zeros(res.mu.size, bool)
    with open(path, "w") as fh:
        fh.write("n,mu,lambda,converged\n")
        for i, m in enumerate(res.mu):
            lam_s = "" if np.isnan(lam_desc[i]) else format(lam_desc[i], ".17g")
            fh.write(f"{i + 1},{format(m, '.17g')},{lam_s},{bool(conv[i])}\n")
