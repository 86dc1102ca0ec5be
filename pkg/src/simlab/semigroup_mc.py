"""Monte Carlo estimators for the transition semigroup

    (P(t) phi)(x) = E[phi(X(t, x))]

its weighted gradient, and the invariant measure, plus exact cross-checks:
a Gaussian (Mehler) oracle for the zero-drift case and a preconditioned
unadjusted Langevin sampler for the Gibbs form of the invariant measure of
the Nemytskii scenario.

Gibbs normalisation convention: for the equation dX = [AX + F(X)]dt + dW
with F = -grad U the stationary density in the truncated coordinates is

    exp( - sum_k |lambda_k| x_k^2 - 2 U(x) )

i.e. TWICE the potential.  (Write the drift as -grad V with
V = -1/2 sum lambda_k x_k^2 + U; for unit noise the density is e^{-2V}.)
The mode-k Gaussian factor has variance 1/(2|lambda_k|).

Gradients in the weighted geometry use the chain-rule identity
grad_R phi = R^2 grad phi throughout.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly

from .spectral_core import (
    SpectralModel,
    grid_transform,
    inverse_grid_transform,
    r_norm,
)
from .drift_models import DriftSpec, apply_drift
from .sde_integrator import (
    CHUNK,
    IntegratorConfig,
    integrate_ensemble,
    integrate_ensemble_variational,
)

__all__ = [
    "TestFunction",
    "MeasureEnsemble",
    "SemigroupEstimate",
    "GradientEstimate",
    "EstimateError",
    "StationarityError",
    "tf_constant",
    "tf_linear",
    "tf_exp_quadratic",
    "tf_cylindrical_tanh",
    "tf_r_norm_squared",
    "tf_custom_grid",
    "tf_callable",
    "tf_affine",
    "invariance_battery",
    "estimate_semigroup",
    "estimate_gradient_semigroup",
    "mehler_oracle",
    "mehler_log_oracle",
    "mehler_pushforward",
    "gaussian_quadratic_log_moment",
    "mehler_mean_variance",
    "sample_invariant",
    "gaussian_invariant_sample",
    "gibbs_oracle_sample",
    "apply_generator",
    "write_measure_csv",
    "DEFAULT_DT",
]

DEFAULT_DT = 1e-3
FD_GRAD_STEP = 1e-5
_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(64)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2.0 * math.pi)


class EstimateError(RuntimeError):
    """Monte Carlo estimate invalidated (too many diverged trajectories)."""


class StationarityError(RuntimeError):
    """Chain halves disagree; the sampler has not reached stationarity."""


# --------------------------------------------------------------- test functions

@dataclass(frozen=True)
class TestFunction:
    """Observable phi with optional analytic derivatives.

    kinds:
      constant             phi(x) = amp
      linear_functional    phi(x) = <a, x>_H
      exp_quadratic        phi(x) = exp(log_amp + theta.x + sum_k cquad_k x_k^2)
      cylindrical_tanh     phi(x) = prod_i tanh(<a_i, x>_H)
      r_norm_squared       phi(x) = min(||x - shift||_R^2, cap)
      custom_grid          phi(x) = sum_j w_q profile(x(xi_j))   (quadrature)
      coefficient_callable phi(x) = profile(x) on mode coefficients

    sup_bound is +inf for unbounded kinds.  Gradients are analytic where
    grad_available is set, otherwise central differences, step 1e-5.
    lip_r_cert, when set, certifies a Lipschitz constant along ||.||_R for
    the raw function (used by the concentration checks).
    """

    kind: str
    directions: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    cquad: Optional[np.ndarray] = None
    log_amp: float = 0.0
    amp: float = 0.0
    shift: Optional[np.ndarray] = None
    cap: float = math.inf
    profile: Optional[Callable] = None
    profile_deriv: Optional[Callable] = None
    sup_bound: float = math.inf
    grad_available: bool = True
    label: str = ""
    offset: float = 0.0      # affine post-map: offset + scale * raw
    scale: float = 1.0
    lip_r_cert: Optional[float] = None

    def __call__(self, model: SpectralModel, x: np.ndarray) -> np.ndarray:
        return self.offset + self.scale * self._raw(model, x)

    def _raw(self, model: SpectralModel, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape[:-1], self.amp)
        if self.kind == "linear_functional":
            return x @ self.directions[0]
        if self.kind == "exp_quadratic":
            expo = self.log_amp + x @ self.theta + (x * x) @ self.cquad
            with np.errstate(over="ignore"):
                return np.exp(expo)
        if self.kind == "cylindrical_tanh":
            return np.prod(np.tanh(x @ self.directions.T), axis=-1)
        if self.kind == "r_norm_squared":
            d = x - self.shift if self.shift is not None else x
            return np.minimum(r_norm(model, d) ** 2, self.cap)
        if self.kind == "custom_grid":
            return np.sum(self.profile(grid_transform(model, x)),
                          axis=-1) * model.quad_weight
        if self.kind == "coefficient_callable":
            return np.asarray(self.profile(x), dtype=float)
        raise ValueError(f"unknown kind {self.kind!r}")

    def gradient(self, model: SpectralModel, x: np.ndarray) -> np.ndarray:
        return self.scale * self._raw_gradient(model, x)

    def _raw_gradient(self, model: SpectralModel, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "linear_functional":
            return np.broadcast_to(self.directions[0], x.shape).copy()
        if self.kind == "exp_quadratic":
            val = self._raw(model, x)
            return val[..., None] * (self.theta + 2.0 * self.cquad * x)
        if self.kind == "cylindrical_tanh":
            proj = x @ self.directions.T          # (..., d)
            th = np.tanh(proj)
            sech2 = 1.0 / np.cosh(proj) ** 2
            total = np.prod(th, axis=-1)
            out = np.zeros_like(x)
            for i in range(self.directions.shape[0]):
                rest = np.where(np.abs(th[..., i]) > 0,
                                total / np.where(th[..., i] == 0, 1.0, th[..., i]),
                                np.prod(np.delete(th, i, axis=-1), axis=-1))
                out = out + (sech2[..., i] * rest)[..., None] * self.directions[i]
            return out
        if self.kind == "r_norm_squared":
            d = x - self.shift if self.shift is not None else x
            inside = (r_norm(model, d) ** 2 < self.cap)[..., None]
            return np.where(inside, 2.0 * d / model.r ** 2, 0.0)
        if self.kind == "custom_grid" and self.profile_deriv is not None:
            g = self.profile_deriv(grid_transform(model, x))
            return inverse_grid_transform(model, g)
        return self._fd_gradient(model, x)

    def _fd_gradient(self, model: SpectralModel, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        for k in range(model.n):
            e = np.zeros(model.n)
            e[k] = FD_GRAD_STEP
            out[..., k] = (self._raw(model, x + e)
                           - self._raw(model, x - e)) / (2 * FD_GRAD_STEP)
        return out

    def r_gradient(self, model: SpectralModel, x: np.ndarray) -> np.ndarray:
        """grad_R phi = R^2 grad phi."""
        return model.r ** 2 * self.gradient(model, x)

    def hessian_r_trace(self, model: SpectralModel, x: np.ndarray) -> np.ndarray:
        """Tr[R^2 D^2 phi](x), analytic kinds only."""
        return self.scale * self._raw_hessian_r_trace(model, x)

    def _raw_hessian_r_trace(self, model: SpectralModel,
                             x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros(x.shape[:-1])
        if self.kind == "linear_functional":
            return np.zeros(x.shape[:-1])
        if self.kind == "exp_quadratic":
            val = self._raw(model, x)
            lin = self.theta + 2.0 * self.cquad * x
            return val * np.sum(model.r ** 2 * (lin * lin + 2.0 * self.cquad), axis=-1)
        if self.kind == "cylindrical_tanh":
            if not self._basis_aligned():
                raise ValueError("analytic Hessian needs basis-aligned directions")
            proj = x @ self.directions.T
            th = np.tanh(proj)
            sech2 = 1.0 / np.cosh(proj) ** 2
            total = np.prod(th, axis=-1)
            out = np.zeros(x.shape[:-1])
            ks = [int(np.argmax(np.abs(d))) for d in self.directions]
            scales = [self.directions[i][ks[i]] for i in range(len(ks))]
            for i, (k, s) in enumerate(zip(ks, scales)):
                rest = np.prod(np.delete(th, i, axis=-1), axis=-1)
                second = -2.0 * th[..., i] * sech2[..., i] * s * s
                out = out + model.r[k] ** 2 * second * rest
            return out
        if self.kind == "r_norm_squared" and not np.isfinite(self.cap):
            return np.full(x.shape[:-1], 2.0 * model.n, dtype=float)
        raise ValueError(f"no analytic Hessian for kind {self.kind!r}")

    def _basis_aligned(self) -> bool:
        if self.directions is None:
            return False
        ks = []
        for d in self.directions:
            nz = np.nonzero(d)[0]
            if len(nz) != 1:
                return False
            ks.append(int(nz[0]))
        return len(set(ks)) == len(ks)


def tf_constant(c: float) -> TestFunction:
    return TestFunction(kind="constant", amp=float(c), sup_bound=abs(float(c)),
                        label=f"const[{c:g}]")


def tf_linear(a: np.ndarray) -> TestFunction:
    a = np.asarray(a, dtype=float)
    return TestFunction(kind="linear_functional", directions=a[None, :],
                        label="linear")


def tf_exp_quadratic(theta, cquad=None, log_amp: float = 0.0) -> TestFunction:
    theta = np.asarray(theta, dtype=float)
    if cquad is None:
        cquad = np.zeros_like(theta)
    cquad = np.asarray(cquad, dtype=float)
    if np.all(cquad < 0):
        sup = math.exp(log_amp + float(np.sum(-theta ** 2 / (4.0 * cquad))))
    elif np.all(cquad <= 0) and np.all(theta[cquad == 0] == 0):
        sup = math.exp(log_amp + float(
            np.sum(-theta[cquad < 0] ** 2 / (4.0 * cquad[cquad < 0]))))
    else:
        sup = math.inf
    return TestFunction(kind="exp_quadratic", theta=theta, cquad=cquad,
                        log_amp=float(log_amp), sup_bound=sup, label="exp_quad")


def tf_cylindrical_tanh(directions) -> TestFunction:
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if not 1 <= dirs.shape[0] <= 3:
        raise ValueError("cylindrical tanh takes 1 to 3 directions")
    return TestFunction(kind="cylindrical_tanh", directions=dirs, sup_bound=1.0,
                        label=f"tanh[{dirs.shape[0]}]")


def tf_r_norm_squared(shift=None, cap: float = math.inf) -> TestFunction:
    shift = None if shift is None else np.asarray(shift, dtype=float)
    return TestFunction(kind="r_norm_squared", shift=shift, cap=float(cap),
                        sup_bound=float(cap), label="r_norm_sq")


def tf_custom_grid(profile, profile_deriv=None,
                   sup_bound: float = math.inf) -> TestFunction:
    return TestFunction(kind="custom_grid", profile=profile,
                        profile_deriv=profile_deriv, sup_bound=sup_bound,
                        grad_available=profile_deriv is not None,
                        label="custom_grid")


def tf_callable(fn: Callable, sup_bound: float = math.inf,
                lip_r_cert: Optional[float] = None,
                label: str = "callable") -> TestFunction:
    """Black-box observable on mode coefficients, (..., n) -> (...).

    Gradients fall back to central differences.  The closure may capture a
    model; evaluating against a different one is the caller's mistake.
    """
    return TestFunction(kind="coefficient_callable", profile=fn,
                        sup_bound=sup_bound, lip_r_cert=lip_r_cert,
                        label=label)


def tf_affine(base: TestFunction, offset: float = 0.0,
              scale: float = 1.0) -> TestFunction:
    """offset + scale * base; gradients and bounds transform accordingly."""
    if base.offset != 0.0 or base.scale != 1.0:
        raise ValueError("base must be a plain test function")
    sup = abs(offset) + abs(scale) * base.sup_bound
    return replace(base, offset=float(offset), scale=float(scale),
                   sup_bound=sup, label=f"affine({base.label})")


def invariance_battery(model: SpectralModel) -> list:
    """Five bounded observables used by the invariance and LSI batteries."""
    n = model.n
    e1 = np.eye(n)[0]
    out = [tf_cylindrical_tanh(e1)]
    if n >= 2:
        out.append(tf_cylindrical_tanh(np.eye(n)[:2]))
    else:
        out.append(tf_cylindrical_tanh(0.5 * e1))
    if n >= 3:
        out.append(tf_cylindrical_tanh(np.eye(n)[:3]))
    else:
        out.append(tf_cylindrical_tanh(2.0 * e1))
    out.append(tf_exp_quadratic(theta=0.5 * e1, cquad=-0.25 * np.ones(n)))
    out.append(tf_r_norm_squared(cap=4.0))
    return out


# ------------------------------------------------------------------- ensembles

@dataclass(frozen=True)
class MeasureEnsemble:
    points: np.ndarray          # (m, n)
    provenance: str             # ergodic | ensemble_of_endpoints | gaussian_oracle | gibbs_ula
    seed: int
    burn_in: float = 0.0
    thinning: float = 0.0

    def __post_init__(self):
        if self.provenance not in ("ergodic", "ensemble_of_endpoints",
                                   "gaussian_oracle", "gibbs_ula"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        pts = np.asarray(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.count, 1.0 / self.count)


@dataclass(frozen=True)
class SemigroupEstimate:
    value: float
    stderr: float
    sample_count: int
    t: float
    x: np.ndarray
    seed: int = 0
    diverged_fraction: float = 0.0

    def to_record(self, check: str, x_id: str = "x0") -> dict:
        return {"check": check, "t": self.t, "x_id": x_id, "value": self.value,
                "stderr": self.stderr, "samples": self.sample_count,
                "seed": self.seed}


@dataclass(frozen=True)
class GradientEstimate:
    value: np.ndarray           # (n,) components in the H_R basis r_i e_i
    stderr: np.ndarray
    sample_count: int
    t: float
    x: np.ndarray
    seed: int = 0


def _mean_and_se(values: np.ndarray) -> tuple:
    m = len(values)
    mean = math.fsum(float(v) for v in values) / m
    if m < 2:
        return mean, 0.0
    var = math.fsum((float(v) - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var / m)


def estimate_semigroup(model: SpectralModel, spec: DriftSpec, t: float,
                       x: np.ndarray, phi: TestFunction, samples: int,
                       seed: int = 0, dt: float = DEFAULT_DT) -> SemigroupEstimate:
    """(P(t) phi)(x) by averaging phi over trajectory endpoints."""
    x = np.asarray(x, dtype=float)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return SemigroupEstimate(value=float(phi(model, x)), stderr=0.0,
                                 sample_count=samples, t=0.0, x=x, seed=seed)
    cfg = IntegratorConfig(dt=min(dt, t), horizon=t, seed=seed)
    res = integrate_ensemble(model, spec, cfg, x, samples)
    frac = float(np.mean(res.diverged))
    if frac > 0.01:
        raise EstimateError(f"{100 * frac:.1f}% of trajectories diverged")
    vals = phi(model, res.states[~res.diverged])
    mean, se = _mean_and_se(vals)
    return SemigroupEstimate(value=mean, stderr=se, sample_count=len(vals),
                             t=t, x=x, seed=seed, diverged_fraction=frac)


def estimate_gradient_semigroup(model: SpectralModel, spec: DriftSpec, t: float,
                                x: np.ndarray, phi: TestFunction, samples: int,
                                seed: int = 0,
                                dt: float = DEFAULT_DT) -> GradientEstimate:
    """grad_R (P(t) phi)(x) in H_R coordinates.

    Component i uses the direction h_i = r_i e_i (an orthonormal basis of
    the weighted space):  E[<grad_R phi(X_t), D_G X(t,x) h_i>_R], which
    simplifies to E[grad phi(X_t) . Y_i] with Y_i the derivative flow.
    value[i] is the coefficient of h_i, so the Euclidean norm of value is
    the weighted norm of the weighted gradient.
    """
    if not phi.grad_available:
        raise ValueError("phi has no gradient")
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        g = model.r * phi.gradient(model, x)
        return GradientEstimate(value=g, stderr=np.zeros_like(g),
                                sample_count=samples, t=0.0, x=x, seed=seed)
    dirs = np.diag(model.r)
    cfg = IntegratorConfig(dt=min(dt, t), horizon=t, seed=seed)
    states, sens, diverged = integrate_ensemble_variational(
        model, spec, cfg, x, dirs, samples)
    if float(np.mean(diverged)) > 0.01:
        raise EstimateError("too many diverged trajectories")
    keep = ~diverged
    grads = phi.gradient(model, states[keep])      # (m, n)
    contrib = np.einsum("mk,mik->mi", grads, sens[keep])
    value = np.empty(model.n)
    stderr = np.empty(model.n)
    for i in range(model.n):
        value[i], stderr[i] = _mean_and_se(contrib[:, i])
    return GradientEstimate(value=value, stderr=stderr,
                            sample_count=int(keep.sum()), t=t, x=x, seed=seed)


# --------------------------------------------------------------------- oracles

def mehler_mean_variance(model: SpectralModel, t: float, x: np.ndarray) -> tuple:
    """Exact Gaussian law of the zero-drift solution at time t from x."""
    x = np.asarray(x, dtype=float)
    mean = np.exp(model.lambdas * t) * x
    var = model.r ** 2 * -np.expm1(2.0 * model.lambdas * t) / (2.0 * np.abs(model.lambdas))
    return mean, var


def gaussian_quadratic_log_moment(theta: np.ndarray, cquad: np.ndarray,
                                  mean: np.ndarray, var: np.ndarray) -> float:
    """log E[exp(theta.X + sum c_k X_k^2)] for X ~ N(mean, diag(var)).

    Returns +inf when any 1 - 2 c_k var_k <= 0 (the integral diverges).
    """
    theta = np.asarray(theta, dtype=float)
    cquad = np.asarray(cquad, dtype=float)
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    denom = 1.0 - 2.0 * cquad * var
    if np.any(denom <= 0.0):
        return math.inf
    num = cquad * mean ** 2 + theta * mean + 0.5 * theta ** 2 * var
    return float(np.sum(num / denom - 0.5 * np.log(denom)))


def mehler_log_oracle(model: SpectralModel, t: float, x: np.ndarray,
                      phi: TestFunction) -> float:
    """log of (P(t) phi)(x) for the zero drift, plain exp_quadratic phi."""
    if phi.kind != "exp_quadratic" or phi.offset != 0.0 or phi.scale != 1.0:
        raise ValueError("log oracle is for plain exp_quadratic kinds")
    mean, var = mehler_mean_variance(model, t, x)
    return phi.log_amp + gaussian_quadratic_log_moment(phi.theta, phi.cquad,
                                                       mean, var)


def mehler_oracle(model: SpectralModel, t: float, x: np.ndarray,
                  phi: TestFunction) -> float:
    """Exact (P(t) phi)(x) for the zero-drift scenario.

    Supports exp_quadratic (closed form; +inf if the Gaussian integral
    diverges), linear_functional, cylindrical_tanh along distinct basis
    axes (64-node Gauss-Hermite per axis), r_norm_squared without cap,
    and constants; affine post-maps pass through linearly.
    """
    x = np.asarray(x, dtype=float)
    mean, var = mehler_mean_variance(model, t, x)
    raw = None
    if phi.kind == "constant":
        raw = float(phi.amp)
    elif phi.kind == "linear_functional":
        raw = float(np.dot(phi.directions[0], mean))
    elif phi.kind == "exp_quadratic":
        lg = gaussian_quadratic_log_moment(phi.theta, phi.cquad, mean, var)
        raw = math.inf if math.isinf(lg) else math.exp(phi.log_amp + lg)
    elif phi.kind == "cylindrical_tanh":
        if not phi._basis_aligned():
            raise ValueError("oracle needs distinct basis-aligned directions")
        raw = 1.0
        for d in phi.directions:
            k = int(np.nonzero(d)[0][0])
            scale = d[k]
            nodes = mean[k] + math.sqrt(var[k]) * _GH_NODES
            raw *= float(np.sum(_GH_WEIGHTS * np.tanh(scale * nodes)))
    elif phi.kind == "r_norm_squared" and not np.isfinite(phi.cap):
        shift = phi.shift if phi.shift is not None else np.zeros(model.n)
        raw = float(np.sum(((mean - shift) ** 2 + var) / model.r ** 2))
    if raw is None:
        raise ValueError(f"oracle does not support kind {phi.kind!r}")
    return phi.offset + phi.scale * raw


def mehler_pushforward(model: SpectralModel, t: float,
                       phi: TestFunction) -> TestFunction:
    """P(t) phi as an exp_quadratic in closed form (zero drift).

    The family exp(la + theta.x + sum c_k x_k^2) is stable under the
    Gaussian transition kernel; the parameter map per mode with
    s = e^{lambda t} and q the accumulated variance is

        c'     = c s^2 / (1 - 2 c q)
        theta' = theta s / (1 - 2 c q)
        la'    = la - 1/2 log(1 - 2 c q) + theta^2 q / (2 (1 - 2 c q))
    """
    if phi.kind != "exp_quadratic" or phi.offset != 0.0 or phi.scale != 1.0:
        raise ValueError("pushforward is for plain exp_quadratic kinds")
    s = np.exp(model.lambdas * t)
    _, q = mehler_mean_variance(model, t, np.zeros(model.n))
    denom = 1.0 - 2.0 * phi.cquad * q
    if np.any(denom <= 0.0):
        raise ValueError("Gaussian transition integral diverges for this phi")
    c2 = phi.cquad * s * s / denom
    th2 = phi.theta * s / denom
    la2 = phi.log_amp + float(np.sum(-0.5 * np.log(denom)
                                     + 0.5 * phi.theta ** 2 * q / denom))
    return tf_exp_quadratic(theta=th2, cquad=c2, log_amp=la2)


# ----------------------------------------------------------- invariant measure

def _halves_diagnostic(points: np.ndarray, what: str):
    """First/second chain halves must agree in mean and second moment."""
    m = points.shape[0]
    half = m // 2
    a, b = points[:half], points[half:2 * half]
    for moment in (1, 2):
        fa, fb = a ** moment, b ** moment
        blocks_a = np.array_split(fa, 10)
        blocks_b = np.array_split(fb, 10)
        ma = np.mean(fa, axis=0)
        mb = np.mean(fb, axis=0)
        se_a = np.std([blk.mean(axis=0) for blk in blocks_a], axis=0, ddof=1) / math.sqrt(10)
        se_b = np.std([blk.mean(axis=0) for blk in blocks_b], axis=0, ddof=1) / math.sqrt(10)
        se = np.sqrt(se_a ** 2 + se_b ** 2)
        tstat = np.abs(ma - mb) / np.where(se > 0, se, 1.0)
        if np.any(tstat > 3.0):
            k = int(np.argmax(tstat))
            raise StationarityError(
                f"{what}: halves disagree on mode {k + 1} moment {moment} "
                f"(t = {float(tstat[k]):.2f})")


def sample_invariant(model: SpectralModel, spec: DriftSpec,
                     burn_in: Optional[float] = None, count: int = 10 ** 4,
                     thinning: Optional[float] = None, seed: int = 0,
                     dt: Optional[float] = None) -> MeasureEnsemble:
    """Ergodic sampler: one long trajectory, burn-in dropped, thinned.

    Defaults follow the exponential convergence rate zeta = zeta_A + zeta_F:
    burn_in 20/|zeta| and thinning 1/|zeta| time units.  The zero-drift
    chain is exact for any dt, so it runs with coarser steps.
    """
    zeta = model.zeta_A + spec.zeta_F
    if not zeta < 0:
        raise ValueError("need zeta_A + zeta_F < 0 for ergodic sampling")
    if burn_in is None:
        burn_in = 20.0 / abs(zeta)
    if thinning is None:
        thinning = 1.0 / abs(zeta)
    if dt is None:
        dt = thinning / 8.0 if spec.kind == "zero" else DEFAULT_DT
    steps_thin = max(1, round(thinning / dt))
    steps_burn = max(1, round(burn_in / dt))
    dt = thinning / steps_thin

    decay = np.exp(model.lambdas * dt)
    weight = np.expm1(model.lambdas * dt) / model.lambdas
    std = np.sqrt(model.r ** 2 * -np.expm1(2.0 * model.lambdas * dt)
                  / (2.0 * np.abs(model.lambdas)))
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))

    x = np.zeros(model.n)
    block = 8192
    buf = std * rng.standard_normal((block, model.n))
    cursor = 0

    def step(xx):
        nonlocal buf, cursor
        if cursor == block:
            buf = std * rng.standard_normal((block, model.n))
            cursor = 0
        eta = buf[cursor]
        cursor += 1
        return decay * xx + weight * apply_drift(spec, model, xx) + eta

    for _ in range(steps_burn):
        x = step(x)
    kept = np.empty((count, model.n))
    for i in range(count):
        for _ in range(steps_thin):
            x = step(x)
        kept[i] = x
    _halves_diagnostic(kept, "ergodic chain")
    return MeasureEnsemble(points=kept, provenance="ergodic", seed=seed,
                           burn_in=float(burn_in), thinning=float(thinning))


def gaussian_invariant_sample(model: SpectralModel, count: int,
                              seed: int = 0) -> MeasureEnsemble:
    """Exact sampler from the zero-drift invariant law N(0, r^2/(2|lambda|))."""
    std = model.r / np.sqrt(2.0 * np.abs(model.lambdas))
    pts = np.empty((count, model.n))
    for start in range(0, count, CHUNK):
        stop = min(start + CHUNK, count)
        rng = np.random.default_rng(np.random.SeedSequence((seed, start // CHUNK)))
        pts[start:stop] = std * rng.standard_normal((stop - start, model.n))
    return MeasureEnsemble(points=pts, provenance="gaussian_oracle", seed=seed)


def gibbs_oracle_sample(model: SpectralModel, b_coeffs, count: int,
                        step: float = 0.01, seed: int = 0) -> MeasureEnsemble:
    """Preconditioned unadjusted Langevin chain for the Gibbs measure.

    Target log-density (see module docstring for the factor-2 convention):

        L(x) = - sum_k |lambda_k| x_k^2 - 2 U(x),
        U(x) = sum_j w_q B(x(xi_j)),  B' = b,  B(0) = 0,

    with preconditioner P = diag(1/(2|lambda_k|)):

        x+ = x + (step/2) P grad L(x) + sqrt(step) P^{1/2} xi.

    Requires the unit weight r_k = 1 (the Gibbs form of the invariant
    measure is only available there); validated against the ergodic
    sampler and, in one dimension, against direct quadrature.
    """
    if not np.allclose(model.r, 1.0, rtol=1e-12, atol=0.0):
        raise ValueError("Gibbs oracle requires r_k = 1 (beta = 0)")
    b_c = np.asarray(b_coeffs, dtype=float)
    pre = 1.0 / (2.0 * np.abs(model.lambdas))
    sq = np.sqrt(step * pre)
    mat = model.eval_matrix

    def grad_L(x):
        v = grid_transform(model, x)
        grad_u = (npoly.polyval(v, b_c) * model.quad_weight) @ mat
        return 2.0 * model.lambdas * x - 2.0 * grad_u

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    # relaxation time of the preconditioned chain is ~2/step iterations
    burn = max(1, round(20.0 / step))
    thin = max(1, round(2.0 / step))
    x = np.zeros(model.n)
    for _ in range(burn):
        x = x + 0.5 * step * pre * grad_L(x) + sq * rng.standard_normal(model.n)
    kept = np.empty((count, model.n))
    for i in range(count):
        for _ in range(thin):
            x = x + 0.5 * step * pre * grad_L(x) + sq * rng.standard_normal(model.n)
        kept[i] = x
    _halves_diagnostic(kept, "gibbs chain")
    return MeasureEnsemble(points=kept, provenance="gibbs_ula", seed=seed,
                           burn_in=float(burn * step), thinning=float(thin * step))


# ------------------------------------------------------------------- generator

def apply_generator(model: SpectralModel, spec: DriftSpec,
                    phi: TestFunction, x: np.ndarray) -> float:
    """N0 phi(x) = 1/2 Tr[R^2 D^2 phi](x) + <A x + F(x), grad phi(x)>_H."""
    x = np.asarray(x, dtype=float)
    trace = phi.hessian_r_trace(model, x)
    grad = phi.gradient(model, x)
    drift = model.lambdas * x + apply_drift(spec, model, x)
    val = 0.5 * np.asarray(trace) + np.sum(drift * grad, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def write_measure_csv(path, ensemble: MeasureEnsemble):
    """Columns: index, coeff_1 .. coeff_n."""
    n = ensemble.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"coeff_{k + 1}" for k in range(n)])
        for i, row in enumerate(ensemble.points):
            w.writerow([i] + [repr(float(v)) for v in row])


def estimate_to_json(path, estimates, check: str):
    """Dump SemigroupEstimate records as a JSON array."""
    records = [e.to_record(check, x_id=f"x{i}") for i, e in enumerate(estimates)]
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2)
