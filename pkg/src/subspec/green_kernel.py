"""Pointwise kernels: Dirichlet G, Robin G_gamma, the factors M and L.

    G(x, y)       = psi(x ^ y) phi(x v y)            (symmetric, >= 0)
    G_gamma(x, y) = G(x, y) + gamma phi(x) phi(y)    (rank-one shift)
    M(x, y)       = phi(y)/phi(x) [y >= x]           (G = M* M)
    L(x, y)       = phi(x)/phi(y) [y <= x]           (adjoint factor)

Everything is evaluated through logs of phi and psi; x ^ y = 0 short-circuits
to exactly 0 so that -inf + inf never forms.  Pointwise calls integrate psi
adaptively per unique argument; matrix assembly (discretization module) goes
through a shared SubordinateCache instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameterError, MissingDecayError, NegativeArgumentError, ZeroGammaError
from .lse_quad import DEFAULT_RTOL
from .phi_models import PhiModel
from .subordinate import log_psi_grid

KERNEL_VARIANTS = ("dirichlet", "robin", "factor-M", "factor-L", "free")


@dataclass(frozen=True)
class KernelKind:
    """Which kernel to evaluate/assemble.

    robin carries gamma != 0; free carries c0 > 0 and builds its own
    comparison profile phi0 = exp(-c0 x), ignoring the supplied model.
    """

    variant: str
    gamma: Optional[complex] = None
    c0: Optional[float] = None

    def __post_init__(self):
        if self.variant not in KERNEL_VARIANTS:
            raise InvalidParameterError(f"unknown kernel variant '{self.variant}'")
        if self.variant == "robin":
            if self.gamma is None or self.gamma == 0:
                raise ZeroGammaError("robin kernel needs gamma != 0")
        if self.variant == "free":
            if self.c0 is None or self.c0 <= 0:
                raise InvalidParameterError("free kernel needs c0 > 0")

    @property
    def gamma_is_real(self) -> bool:
        return self.gamma is not None and complex(self.gamma).imag == 0.0

    @property
    def hermitian(self) -> bool:
        if self.variant in ("dirichlet", "free"):
            return True
        if self.variant == "robin":
            return self.gamma_is_real
        return False


def dirichlet() -> KernelKind:
    return KernelKind("dirichlet")


def robin(gamma: complex) -> KernelKind:
    return KernelKind("robin", gamma=gamma)


def factor(which: str) -> KernelKind:
    return KernelKind(f"factor-{which}")


def free(c0: float) -> KernelKind:
    return KernelKind("free", c0=c0)


def _pair_arrays(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise NegativeArgumentError("kernel arguments must be >= 0")
    return np.broadcast_arrays(x, y)


def _log_psi_at(model: PhiModel, pts: np.ndarray, rtol: float) -> np.ndarray:
    """log psi at arbitrary nonnegative points (0 handled by the caller)."""
    flat = pts.ravel()
    pos = flat[flat > 0]
    out = np.full(flat.shape, -np.inf)
    if pos.size:
        uniq, inv = np.unique(pos, return_inverse=True)
        vals = log_psi_grid(model, uniq, rtol=rtol)
        out[flat > 0] = vals[inv]
    return out.reshape(pts.shape)


def green_eval(model: PhiModel, x, y, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """G(x, y); symmetric in (x, y) through a shared min/max code path."""
    x, y = _pair_arrays(x, y)
    mn = np.minimum(x, y)
    mx = np.maximum(x, y)
    log_psi_mn = _log_psi_at(model, mn, rtol)
    with np.errstate(invalid="ignore"):
        vals = np.exp(log_psi_mn + model.log_phi(mx))
    vals = np.where(mn == 0.0, 0.0, vals)
    return vals if vals.ndim else float(vals)


def green_gamma_eval(model: PhiModel, gamma: complex, x, y,
                     rtol: float = DEFAULT_RTOL):
    """G_gamma(x, y) = G(x, y) + gamma phi(x) phi(y)."""
    if gamma == 0:
        raise ZeroGammaError("gamma must be nonzero")
    x, y = _pair_arrays(x, y)
    g = green_eval(model, x, y, rtol)
    shift = gamma * np.exp(model.log_phi(x) + model.log_phi(y))
    out = g + shift
    return out if np.ndim(out) else complex(out) if np.iscomplexobj(shift) else float(out)


def factor_kernel_eval(model: PhiModel, which: str, x, y) -> np.ndarray:
    """M(x,y) = phi(y)/phi(x) for y >= x; L(x,y) = phi(x)/phi(y) for y <= x."""
    x, y = _pair_arrays(x, y)
    if which in ("M", "factor-M"):
        vals = np.where(y >= x, np.exp(model.log_phi(y) - model.log_phi(x)), 0.0)
    elif which in ("L", "factor-L"):
        vals = np.where(y <= x, np.exp(model.log_phi(x) - model.log_phi(y)), 0.0)
    else:
        raise InvalidParameterError(f"unknown factor '{which}'")
    return vals if vals.ndim else float(vals)


def exp_bound_margin(model: PhiModel, x, y, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """(c2^3 / (2 c c1^3)) e^{-c|x-y|} - G(x, y); >= 0 under the sandwich."""
    if model.decay is None:
        raise MissingDecayError(f"{model.label} carries no decay metadata")
    x, y = _pair_arrays(x, y)
    const = model.decay.kernel_bound_const()
    bound = const * np.exp(-model.decay.rate * np.abs(x - y))
    out = bound - green_eval(model, x, y, rtol)
    return out if np.ndim(out) else float(out)
