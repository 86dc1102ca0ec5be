"""Truncated diagonal representation of the linear pair (A, R).

Everything downstream works in the eigenbasis of A on n retained modes:

    A e_k = lambda_k e_k,   lambda_k <= zeta_A < 0,
    R e_k = r_k e_k,        r_k = |lambda_k|**(-beta) when beta is set.

State vectors are plain float64 arrays of spectral coefficients (batch
dimensions allowed on the left).  Three norms matter:

    ||x||_H   Euclidean norm of the coefficients,
    ||x||_R   = ||R^{-1} x||_H = sqrt(sum (x_k / r_k)^2),
    ||x||_E   sup of the collocation-grid values of the represented function.

The collocation grid is uniform in (0,1) with G = grid_factor*(2n+1)
interior points; the evaluation matrix of the sine basis is orthogonal
under the uniform grid weight, so grid_transform / inverse_grid_transform
round-trip exactly (up to rounding) for any G >= n.

``verify_smoothing`` fits constants (M, w, gamma) for the regularisation
bound  ||e^{tA} x||_R <= M e^{-w t} t^{-gamma} ||x||_H  and then checks the
fitted bound on a log-spaced t-grid; a failed fit is always reported via
the ``ok`` flag, never silently ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

__all__ = [
    "SpectralModel",
    "SmoothingFit",
    "build_dirichlet_laplacian",
    "build_periodic_laplacian",
    "ou_model",
    "semigroup_flow",
    "h_norm",
    "r_norm",
    "r_inner",
    "e_norm",
    "operator_norm_R",
    "grid_transform",
    "inverse_grid_transform",
    "verify_smoothing",
]


@dataclass(frozen=True)
class SmoothingFit:
    """Fitted constants for ||e^{tA}x||_R <= M e^{-wt} t^{-gamma} ||x||_H."""

    M: float
    w: float
    gamma: float
    ok: bool
    # diagnostic payload: the t-grid the bound was certified on, the
    # left-hand envelope sup_k |lambda_k|^beta e^{lambda_k t}, and margins
    t_grid: np.ndarray = field(repr=False, default=None)
    lhs: np.ndarray = field(repr=False, default=None)
    margin: np.ndarray = field(repr=False, default=None)
    note: str = ""


@dataclass(frozen=True)
class SpectralModel:
    """Diagonal (A, R) pair plus grid realisation of the function space.

    Invariants (enforced in __post_init__):
      * lambdas strictly negative and nonincreasing, lambdas <= zeta_A < 0
      * r nonnegative; r_k = |lambda_k|**(-beta) when beta is not None.
        r_k = 0 switches mode k off deterministically; such models have no
        R-geometry (r_norm and friends divide by r).
    """

    n: int
    lambdas: np.ndarray
    r: np.ndarray
    zeta_A: float
    beta: Optional[float] = None
    basis: str = "dirichlet"
    grid_factor: int = 1
    smoothing: Optional[SmoothingFit] = None
    # filled in __post_init__
    grid: np.ndarray = field(init=False, repr=False, default=None)
    eval_matrix: np.ndarray = field(init=False, repr=False, default=None)
    quad_weight: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        r = np.asarray(self.r, dtype=float)
        if lam.shape != (self.n,) or r.shape != (self.n,):
            raise ValueError("lambdas and r must have shape (n,)")
        if not np.all(lam < 0.0):
            raise ValueError("eigenvalues must be strictly negative")
        if np.any(np.diff(lam) > 0.0):
            raise ValueError("eigenvalues must be nonincreasing in k")
        if not (self.zeta_A < 0.0) or np.any(lam > self.zeta_A + 1e-15):
            raise ValueError("need lambda_k <= zeta_A < 0")
        if not np.all(r >= 0.0):
            raise ValueError("r_k must be nonnegative")
        if self.beta is not None:
            expect = np.abs(lam) ** (-self.beta)
            if not np.allclose(r, expect, rtol=1e-12, atol=0.0):
                raise ValueError("r_k inconsistent with |lambda_k|^(-beta)")
        if self.basis not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.grid_factor < 1:
            raise ValueError("grid_factor must be >= 1")
        lam.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "r", r)

        G = self.grid_factor * (2 * self.n + 1)
        if G < self.n:
            raise ValueError("grid smaller than mode count")
        ks = np.arange(1, self.n + 1)
        if self.basis == "dirichlet":
            # interior points of [0,1]; e_k(xi) = sqrt(2) sin(k pi xi)
            xi = np.arange(1, G + 1) / (G + 1)
            mat = np.sqrt(2.0) * np.sin(np.pi * np.outer(xi, ks))
            wq = 1.0 / (G + 1)
        else:
            # sine sector of the torus: e_k(xi) = sqrt(2) sin(2 pi k xi);
            # this keeps the machinery diagonal, see module docstring
            xi = np.arange(G) / G
            mat = np.sqrt(2.0) * np.sin(2.0 * np.pi * np.outer(xi, ks))
            wq = 1.0 / G
        mat.setflags(write=False)
        xi.setflags(write=False)
        object.__setattr__(self, "grid", xi)
        object.__setattr__(self, "eval_matrix", mat)
        object.__setattr__(self, "quad_weight", wq)

    @property
    def grid_size(self) -> int:
        return self.eval_matrix.shape[0]

    def with_grid_factor(self, factor: int) -> "SpectralModel":
        return replace(self, grid_factor=factor)


def build_dirichlet_laplacian(n: int, beta: float = 0.0,
                              grid_factor: int = 1) -> SpectralModel:
    """1-D Dirichlet Laplacian on [0,1]: lambda_k = -(k pi)^2, r_k = (k pi)^{-2 beta}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ks = np.arange(1, n + 1, dtype=float)
    lam = -((ks * np.pi) ** 2)
    r = np.abs(lam) ** (-beta)
    model = SpectralModel(n=n, lambdas=lam, r=r, zeta_A=-np.pi ** 2,
                          beta=beta, basis="dirichlet", grid_factor=grid_factor)
    return replace(model, smoothing=verify_smoothing(model))


def build_periodic_laplacian(n: int, beta: float = 0.0,
                             grid_factor: int = 1) -> SpectralModel:
    """Periodic variant, lambda_k = -(2 pi k)^2 on the sine sector."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ks = np.arange(1, n + 1, dtype=float)
    lam = -((2.0 * np.pi * ks) ** 2)
    r = np.abs(lam) ** (-beta)
    model = SpectralModel(n=n, lambdas=lam, r=r, zeta_A=-(2.0 * np.pi) ** 2,
                          beta=beta, basis="periodic", grid_factor=grid_factor)
    return replace(model, smoothing=verify_smoothing(model))


def ou_model(n: int = 1, lam: float = -1.0) -> SpectralModel:
    """A = lam * Id proxy (all eigenvalues equal), r = 1, beta = 0.

    The n=1, lam=-1 instance is the scalar Ornstein-Uhlenbeck reference
    scenario with stationary variance 1/2.
    """
    lambdas = np.full(n, float(lam))
    r = np.ones(n)
    model = SpectralModel(n=n, lambdas=lambdas, r=r, zeta_A=float(lam),
                          beta=0.0, basis="dirichlet")
    return replace(model, smoothing=verify_smoothing(model))


def semigroup_flow(model: SpectralModel, t: float, x: np.ndarray) -> np.ndarray:
    """Apply e^{tA} mode by mode.  t = 0 is the identity.  Batch-safe."""
    if t < 0:
        raise ValueError("t must be >= 0")
    x = np.asarray(x, dtype=float)
    return x * np.exp(model.lambdas * t)


def h_norm(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


def r_norm(model: SpectralModel, x: np.ndarray) -> np.ndarray:
    """||x||_R = ||R^{-1}x||_H; reduces to ||x||_H when R = Id."""
    x = np.asarray(x, dtype=float)
    return np.linalg.norm(x / model.r, axis=-1)


def r_inner(model: SpectralModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sum((x / model.r) * (y / model.r), axis=-1)


def operator_norm_R(model: SpectralModel) -> float:
    """||R||_{L(H)} = max_k r_k (diagonal operator)."""
    return float(np.max(model.r))


def grid_transform(model: SpectralModel, x: np.ndarray) -> np.ndarray:
    """Coefficients -> collocation-grid values (last axis n -> G)."""
    x = np.asarray(x, dtype=float)
    return x @ model.eval_matrix.T


def inverse_grid_transform(model: SpectralModel, values: np.ndarray) -> np.ndarray:
    """Grid values -> coefficients; exact inverse of grid_transform on
    band-limited data because the sine columns are orthogonal under the
    uniform grid weight."""
    values = np.asarray(values, dtype=float)
    return (values @ model.eval_matrix) * model.quad_weight


def e_norm(model: SpectralModel, x: np.ndarray) -> np.ndarray:
    """Sup norm over the collocation grid (surrogate for the C([0,1]) norm)."""
    return np.max(np.abs(grid_transform(model, x)), axis=-1)


def _smoothing_lhs(model: SpectralModel, t_grid: np.ndarray) -> np.ndarray:
    # ||e^{tA} e_k||_R / ||e_k||_H = e^{lambda_k t} / r_k; max over k
    per_mode = np.exp(np.outer(t_grid, model.lambdas)) / model.r
    return per_mode.max(axis=1)


def verify_smoothing(model: SpectralModel,
                     t_grid: Optional[np.ndarray] = None) -> SmoothingFit:
    """Fit (M, w, gamma) and certify the bound on a log-spaced t-grid.

    beta = 0 (or unset): the semigroup is an R-contraction up to e^{zeta_A t},
    so (M, w, gamma) = (1, |zeta_A|, 0) exactly.

    beta > 0: gamma is the log-log slope of the envelope
    sup_k |lambda_k|^beta e^{lambda_k t} at the small-t end (clamped to
    [0, beta]); w is then pushed up from 0 only as far as it does not
    inflate M = max_t lhs(t) t^gamma e^{w t} by more than 5 percent, which
    keeps M near the analytic envelope constant (beta/e)^beta.
    """
    if t_grid is None:
        t_grid = np.geomspace(1e-4, 10.0, 200)
    lhs = _smoothing_lhs(model, t_grid)

    beta = model.beta if model.beta is not None else 0.0
    if beta == 0.0:
        M, w, gamma = 1.0, abs(model.zeta_A), 0.0
        rhs = M * np.exp(-w * t_grid)
        margin = rhs - lhs
        ok = bool(np.all(margin >= -1e-14))
        return SmoothingFit(M=M, w=w, gamma=gamma, ok=ok, t_grid=t_grid,
                            lhs=lhs, margin=margin,
                            note="contraction branch, constants exact")

    # envelope regime: the continuous sup over lambda sits at lambda = beta/t,
    # which is inside the spectrum for t <= beta/|lambda_1|
    t_hi = min(1e-2, beta / abs(model.lambdas[0]))
    window = t_grid <= t_hi
    if window.sum() < 5:
        window = t_grid <= t_grid[4]
    slope = np.polyfit(np.log(t_grid[window]), np.log(lhs[window]), 1)[0]
    gamma = float(np.clip(-slope, 0.0, beta))

    def m_of(w):
        return float(np.max(lhs * t_grid ** gamma * np.exp(w * t_grid)))

    m0 = m_of(0.0)
    w = 1e-3 * abs(model.zeta_A)
    for cand in np.linspace(0.0, abs(model.zeta_A), 41)[1:]:
        if m_of(cand) <= 1.05 * m0:
            w = float(cand)
        else:
            break
    M = m_of(w) * (1.0 + 1e-9)

    rhs = M * np.exp(-w * t_grid) * t_grid ** (-gamma)
    margin = rhs - lhs
    ok = bool(np.all(margin >= 0.0) and gamma <= beta + 1e-12)
    note = "" if ok else "fit failed to certify the bound on the t-grid"
    return SmoothingFit(M=float(M), w=float(w), gamma=gamma, ok=ok,
                        t_grid=t_grid, lhs=lhs, margin=margin, note=note)
