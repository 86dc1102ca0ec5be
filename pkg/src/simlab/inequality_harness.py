"""Estimator-versus-bound checks for the functional inequalities of the
invariant measure: entropy (log-Sobolev), Poincare, hypercontractivity,
supercontractivity, Harnack, Lipschitz concentration, exponential square
integrability, epsilon log-Sobolev, the pointwise semigroup log-Sobolev
bound, the gradient commutation estimate, and ultraboundedness.

Every check produces an InequalityReport.  Verdicts are a pure function of
(lhs, rhs, joint stderr, k_sigma): fail iff margin < -k_sigma * stderr,
pass iff margin >= +k_sigma * stderr, pass_within_noise between; checks
with zero stderr (oracle against oracle) use an absolute tolerance of
1e-8 instead.  Negative controls carry expected_failure=True; a suite is
healthy when those fail and everything else passes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn, gammainc

from .spectral_core import SpectralModel, r_norm
from .drift_models import DriftSpec
from .sde_integrator import IntegratorConfig, integrate_coupled_pair, integrate_ensemble
from .semigroup_mc import (
    DEFAULT_DT,
    MeasureEnsemble,
    TestFunction,
    estimate_gradient_semigroup,
    gaussian_quadratic_log_moment,
    mehler_mean_variance,
    mehler_oracle,
    tf_exp_quadratic,
    _GH_NODES,
    _GH_WEIGHTS,
)

__all__ = [
    "ConstantsPack",
    "InequalityReport",
    "BudgetError",
    "constants_for",
    "constants_slow_decay",
    "entropy",
    "weighted_gradient_squared",
    "certified_r_lipschitz",
    "check_log_sobolev",
    "check_poincare",
    "check_hypercontractivity",
    "hypercontractivity_norm_oracle",
    "hypercontractivity_onset",
    "check_harnack",
    "check_concentration",
    "concentration_curve",
    "check_fernique",
    "check_supercontractivity_integrals",
    "check_semigroup_log_sobolev",
    "check_eps_log_sobolev",
    "check_gradient_estimate",
    "check_ultrabounded",
    "reports_to_json",
    "reports_to_csv",
    "suite_exit_code",
    "K_SIGMA",
    "ORACLE_TOL",
]

K_SIGMA = 3.0
ORACLE_TOL = 1e-8


class BudgetError(RuntimeError):
    """Nested Monte Carlo budget exceeded."""


# ------------------------------------------------------------------- constants

@dataclass(frozen=True)
class ConstantsPack:
    """Explicit constants entering the bounds, all derived from the weighted
    dissipativity rate zeta_R < 0 (or from the integrated decay envelope in
    the slow branch)."""

    zeta_R: float
    lsi_constant: float           # entropy bound constant
    lsi_constant_h: float         # unweighted-Lipschitz variant: ||R|| times it
    branch: str = "dissipative"

    def smoothing_time_constant(self, t: float) -> float:
        """Finite-time entropy constant 3|zeta_R|^-1 (1 - e^{2 zeta_R t})."""
        return 3.0 / abs(self.zeta_R) * -math.expm1(2.0 * self.zeta_R * t)

    def harnack_exponent(self, p: float, t: float) -> float:
        """Coefficient of ||h||_R^2 in the Harnack exponent."""
        if not (p > 1 and t > 0):
            raise ValueError("need p > 1 and t > 0")
        return p * math.expm1(2.0 * self.zeta_R * t) / (
            2.0 * self.zeta_R * (p - 1.0) * t * t)

    def gradient_decay(self, t: float) -> float:
        """Envelope e^{2 zeta_R t} for the squared weighted gradient."""
        return math.exp(2.0 * self.zeta_R * t)

    def hyper_exponent_limit(self, q: float, t: float) -> float:
        """Largest admissible output exponent (q-1) e^{t/(2C)} + 1."""
        return (q - 1.0) * math.exp(t / (2.0 * self.lsi_constant)) + 1.0

    @property
    def concentration_rate(self) -> float:
        """Gaussian tail rate 1/(16 sqrt(2) C) for weighted-Lipschitz maps."""
        return 1.0 / (16.0 * math.sqrt(2.0) * self.lsi_constant)

    @property
    def concentration_rate_h(self) -> float:
        return 1.0 / (16.0 * math.sqrt(2.0) * self.lsi_constant_h)

    @property
    def fernique_threshold(self) -> float:
        """Exponential square-integrability holds below this coefficient."""
        return self.concentration_rate


def constants_for(model: SpectralModel, zeta_R: float) -> ConstantsPack:
    """Dissipative branch: the entropy constant is exactly 1/(2|zeta_R|)."""
    if not zeta_R < 0:
        raise ValueError("zeta_R must be negative")
    c = 1.0 / (2.0 * abs(zeta_R))
    return ConstantsPack(zeta_R=zeta_R, lsi_constant=c,
                         lsi_constant_h=float(np.max(model.r)) * c)


def constants_slow_decay(model: SpectralModel, envelope_constant: float,
                         power: float, rate: float,
                         zeta: float) -> ConstantsPack:
    """Integrated-envelope branch.

    With m0 = min(rate, |zeta|) and g the lower incomplete gamma function,

        C = K * ( g(1 - power, m0) / m0^(1 - power) + e^{m0} / m0 ).

    Requires power < 1 so the time integral converges at the origin.
    """
    if not 0 <= power < 1:
        raise ValueError("power must lie in [0, 1)")
    m0 = min(rate, abs(zeta))
    if m0 <= 0:
        raise ValueError("need a positive decay rate")
    a = 1.0 - power
    lower_gamma = gammainc(a, m0) * gamma_fn(a)
    c = envelope_constant * (lower_gamma / m0 ** a + math.exp(m0) / m0)
    return ConstantsPack(zeta_R=zeta, lsi_constant=c,
                         lsi_constant_h=float(np.max(model.r)) * c,
                         branch="slow_decay")


# --------------------------------------------------------------------- reports

@dataclass(frozen=True)
class InequalityReport:
    name: str
    paper_eq: str
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    margin: float
    verdict: str
    scenario: str
    seed: int
    note: str = ""
    expected_failure: bool = False
    degraded: bool = False

    def to_row(self) -> list:
        return [self.name, self.paper_eq, self.scenario, repr(self.lhs),
                repr(self.lhs_se), repr(self.rhs), repr(self.rhs_se),
                repr(self.margin), self.verdict, self.seed]


def _verdict(margin: float, joint_se: float, k_sigma: float = K_SIGMA) -> str:
    if not math.isfinite(margin):
        return "fail" if margin < 0 else "pass"
    if joint_se == 0.0:
        return "pass" if margin >= -ORACLE_TOL else "fail"
    if margin < -k_sigma * joint_se:
        return "fail"
    if margin >= k_sigma * joint_se:
        return "pass"
    return "pass_within_noise"


def _report(name, paper_eq, lhs, lhs_se, rhs, rhs_se, scenario, seed,
            note="", expected_failure=False, degraded=False,
            k_sigma=K_SIGMA) -> InequalityReport:
    margin = rhs - lhs
    jse = math.hypot(lhs_se, rhs_se)
    return InequalityReport(name=name, paper_eq=paper_eq, lhs=float(lhs),
                            lhs_se=float(lhs_se), rhs=float(rhs),
                            rhs_se=float(rhs_se), margin=float(margin),
                            verdict=_verdict(margin, jse, k_sigma),
                            scenario=scenario, seed=seed, note=note,
                            expected_failure=expected_failure,
                            degraded=degraded)


def reports_to_json(path, reports: Sequence[InequalityReport]):
    with open(path, "w") as fh:
        json.dump([asdict(r) for r in reports], fh, indent=2)


def reports_to_csv(path, reports: Sequence[InequalityReport]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "paper_eq", "scenario", "lhs", "lhs_se", "rhs",
                    "rhs_se", "margin", "verdict", "seed"])
        for r in reports:
            w.writerow(r.to_row())


def suite_exit_code(reports: Sequence[InequalityReport]) -> int:
    """0 healthy, 1 unexpected verdict, 3 degraded resolution.

    A negative control (expected_failure) is healthy when it fails and a
    defect when it passes.
    """
    bad = False
    degraded = False
    for r in reports:
        failed = r.verdict == "fail"
        if failed != r.expected_failure:
            bad = True
        degraded = degraded or r.degraded
    if bad:
        return 1
    return 3 if degraded else 0


# ------------------------------------------------------------ basic functionals

def entropy(model: SpectralModel, ensemble: MeasureEnsemble, phi: TestFunction,
            p: float = 2.0) -> tuple:
    """Entropy of |phi|^p under the empirical measure, with stderr.

    Ent(v) = E[v ln v] - E[v] ln E[v], v = |phi|^p, 0 ln 0 := 0.
    Nonnegative by Jensen; asserted, then clipped at zero.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    v = np.abs(phi(model, ensemble.points)) ** p
    with np.errstate(divide="ignore", invalid="ignore"):
        vlnv = np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)
    m = float(v.mean())
    if m == 0.0:
        return 0.0, 0.0
    val = float(vlnv.mean()) - m * math.log(m)
    assert val >= -1e-10 * (1.0 + abs(val))
    # influence function of a ln a - b ln b at (E[v ln v], E[v])
    infl = vlnv - (math.log(m) + 1.0) * v
    se = float(infl.std(ddof=1) / math.sqrt(len(v)))
    return max(val, 0.0), se


def weighted_gradient_squared(model: SpectralModel, phi: TestFunction,
                              points: np.ndarray) -> np.ndarray:
    """||grad_R phi||_R^2 pointwise; equals sum_k r_k^2 (d_k phi)^2."""
    g = phi.gradient(model, points)
    return np.sum(model.r ** 2 * g ** 2, axis=-1)


def certified_r_lipschitz(model: SpectralModel, phi: TestFunction,
                          unweighted: bool = False) -> float:
    """Analytic Lipschitz constant in the weighted (or plain) norm.

    Supported: an explicit lip_r_cert carried by phi, linear functionals,
    and single-direction tanh cylinders,
    |<a,x> - <a,y>| <= ||r a||_2 ||x-y||_R (and |tanh'| <= 1).
    """
    if phi.lip_r_cert is not None:
        if unweighted:
            raise ValueError("carried certificate lives in the weighted norm")
        return abs(phi.scale) * float(phi.lip_r_cert)
    if phi.kind in ("linear_functional", "cylindrical_tanh"):
        if phi.kind == "cylindrical_tanh" and phi.directions.shape[0] != 1:
            raise ValueError("certify single-direction cylinders only")
        a = phi.directions[0]
        wvec = np.ones_like(model.r) if unweighted else model.r
        return abs(phi.scale) * float(np.linalg.norm(wvec * a))
    raise ValueError(f"no Lipschitz certificate for kind {phi.kind!r}")


def _mean_se(values: np.ndarray) -> tuple:
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


# ------------------------------------------------------------------ entropy law

def check_log_sobolev(model: SpectralModel, ensemble: MeasureEnsemble,
                      phi: TestFunction, p: float, constants: ConstantsPack,
                      scenario: str = "", seed: int = 0) -> InequalityReport:
    """Ent(|phi|^p) <= p^2 C int |phi|^{p-2} ||grad_R phi||_R^2 1_{phi != 0}."""
    if not phi.grad_available:
        raise ValueError("phi has no gradient")
    lhs, lhs_se = entropy(model, ensemble, phi, p)
    pts = ensemble.points
    vals = phi(model, pts)
    gsq = weighted_gradient_squared(model, phi, pts)
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(vals != 0.0, np.abs(vals) ** (p - 2.0), 0.0)
    integrand = p * p * constants.lsi_constant * weight * gsq
    rhs, rhs_se = _mean_se(integrand)
    return _report("log_sobolev", "INEQ-LSI", lhs, lhs_se, rhs, rhs_se,
                   scenario, seed, note=f"p={p:g}")


def check_poincare(model: SpectralModel, ensemble: MeasureEnsemble,
                   phi: TestFunction, constants: ConstantsPack,
                   scenario: str = "", seed: int = 0,
                   constant_override: Optional[float] = None) -> InequalityReport:
    """Var(phi) <= C int ||grad_R phi||_R^2 dnu."""
    if not phi.grad_available:
        raise ValueError("phi has no gradient")
    c = constants.lsi_constant if constant_override is None else constant_override
    pts = ensemble.points
    vals = phi(model, pts)
    centered_sq = (vals - vals.mean()) ** 2
    lhs = float(vals.var(ddof=1))
    lhs_se = float(centered_sq.std(ddof=1) / math.sqrt(len(vals)))
    rhs, rhs_se = _mean_se(c * weighted_gradient_squared(model, phi, pts))
    return _report("poincare", "INEQ-POINCARE", lhs, lhs_se, rhs, rhs_se,
                   scenario, seed)


# ------------------------------------------------------------ hypercontractivity

def hypercontractivity_norm_oracle(model: SpectralModel, t: float, q: float,
                                   theta: np.ndarray,
                                   constants: ConstantsPack) -> tuple:
    """Exact (lhs, rhs) for phi = e^{theta.x} under the zero-drift scenario.

    Both norms are Gaussian moment integrals: the transported function
    stays exponential and the invariant law is the product Gaussian.
    """
    theta = np.asarray(theta, dtype=float)
    p_max = constants.hyper_exponent_limit(q, t)
    qvar = model.r ** 2 / (2.0 * np.abs(model.lambdas))
    zeros = np.zeros(model.n)
    th_t = theta * np.exp(model.lambdas * t)
    shift = gaussian_quadratic_log_moment(theta, zeros, zeros,
                                          mehler_mean_variance(model, t, zeros)[1])
    log_lhs = (gaussian_quadratic_log_moment(p_max * th_t, zeros, zeros, qvar)
               / p_max + shift)
    log_rhs = gaussian_quadratic_log_moment(q * theta, zeros, zeros, qvar) / q
    return math.exp(log_lhs), math.exp(log_rhs)


def check_hypercontractivity(model: SpectralModel, spec: DriftSpec,
                             ensemble: MeasureEnsemble, t: float, q: float,
                             phi_battery: Sequence[TestFunction],
                             constants: ConstantsPack, scenario: str = "",
                             seed: int = 0, outer: int = 128, inner: int = 256,
                             dt: float = 5e-3,
                             budget: int = 10 ** 8) -> list:
    """||P(t) phi||_{p_max} <= ||phi||_q with p_max = (q-1) e^{t/(2C)} + 1.

    The left norm uses nested Monte Carlo: `outer` start points drawn from
    the ensemble, `inner` trajectories per start point, all integrated in
    one batch.  Inner noise inflates |.|^{p_max} by convexity, which only
    makes the check harder.
    """
    if not (q > 1 and t > 0):
        raise ValueError("need q > 1 and t > 0")
    p_max = constants.hyper_exponent_limit(q, t)
    steps = max(1, round(t / dt))
    if outer * inner * steps > budget:
        raise BudgetError("nested Monte Carlo budget exceeded")
    stride = max(1, ensemble.count // outer)
    starts = ensemble.points[::stride][:outer]
    outer_n = len(starts)
    x0 = np.repeat(starts, inner, axis=0)
    cfg = IntegratorConfig(dt=dt, horizon=t, seed=seed)
    res = integrate_ensemble(model, spec, cfg, x0, outer_n * inner)
    reports = []
    for phi in phi_battery:
        vals = phi(model, res.states).reshape(outer_n, inner)
        ok = ~res.diverged.reshape(outer_n, inner)
        inner_means = np.where(ok, vals, 0.0).sum(axis=1) / np.maximum(
            ok.sum(axis=1), 1)
        u = np.abs(inner_means) ** p_max
        mu, mu_se = _mean_se(u)
        # delta method in relative terms; mu**(1/p - 1) overflows for tiny mu
        lhs = mu ** (1.0 / p_max)
        lhs_se = lhs * (mu_se / mu) / p_max if mu > 0 else 0.0
        w = np.abs(phi(model, ensemble.points)) ** q
        mw, mw_se = _mean_se(w)
        rhs = mw ** (1.0 / q)
        rhs_se = rhs * (mw_se / mw) / q if mw > 0 else 0.0
        reports.append(_report("hypercontractivity", "INEQ-HYPER", lhs, lhs_se,
                               rhs, rhs_se, scenario, seed,
                               note=f"{phi.label} q={q:g} p_max={p_max:.4g}"))
    return reports


def hypercontractivity_onset(model: SpectralModel, q: float, theta: np.ndarray,
                             constants: ConstantsPack, t0: float,
                             t_grid: Sequence[float]) -> dict:
    """Diagnostic scan: keep p fixed at p_max(t0) while t shrinks below t0.

    Returns the first t where the exact exponential-function norms violate
    the fixed-exponent inequality; no verdict, this maps the onset.
    """
    p_fixed = constants.hyper_exponent_limit(q, t0)
    rows = []
    failing = []
    for t in sorted(t_grid):
        lhs, rhs = _hyper_norms_fixed_p(model, t, q, p_fixed, theta)
        rows.append({"t": t, "lhs": lhs, "rhs": rhs})
        if lhs > rhs * (1.0 + 1e-12) and t < t0:
            failing.append(t)
    onset = max(failing) if failing else None
    return {"p_fixed": p_fixed, "t0": t0, "first_failing_t": onset,
            "rows": rows}


def _hyper_norms_fixed_p(model, t, q, p, theta):
    theta = np.asarray(theta, dtype=float)
    qvar = model.r ** 2 / (2.0 * np.abs(model.lambdas))
    zeros = np.zeros(model.n)
    th_t = theta * np.exp(model.lambdas * t)
    shift = gaussian_quadratic_log_moment(theta, zeros, zeros,
                                          mehler_mean_variance(model, t, zeros)[1])
    log_lhs = gaussian_quadratic_log_moment(p * th_t, zeros, zeros, qvar) / p + shift
    log_rhs = gaussian_quadratic_log_moment(q * theta, zeros, zeros, qvar) / q
    return math.exp(log_lhs), math.exp(log_rhs)


# ------------------------------------------------------------------ Harnack

def _gh_expectation(mean: float, var: float, fn: Callable) -> float:
    return float(np.sum(_GH_WEIGHTS * fn(mean + math.sqrt(var) * _GH_NODES)))


def check_harnack(model: SpectralModel, spec: DriftSpec, t: float,
                  x: np.ndarray, h: np.ndarray, p: float, phi: TestFunction,
                  samples: int, seed: int = 0, constants: ConstantsPack = None,
                  scenario: str = "", dt: float = DEFAULT_DT,
                  oracle: bool = False) -> InequalityReport:
    """|P(t)phi(x+h)|^p <= P(t)|phi|^p(x) exp(kappa(p,t) ||h||_R^2).

    With oracle=True (zero drift, single-direction tanh cylinders or
    exponentials) both sides are Gauss-Hermite integrals, stderr zero.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    kappa = constants.harnack_exponent(p, t)
    hr2 = float(r_norm(model, h) ** 2)
    blow = math.exp(kappa * hr2)
    if oracle:
        if spec.kind != "zero":
            raise ValueError("oracle mode needs the zero-drift scenario")
        lhs = abs(_mehler_scalar(model, t, x + h, phi)) ** p
        rhs = _mehler_abs_power(model, t, x, phi, p) * blow
        return _report("harnack", "INEQ-HARNACK", lhs, 0.0, rhs, 0.0,
                       scenario, seed, note=f"p={p:g} t={t:g} oracle")
    cfg_a = IntegratorConfig(dt=min(dt, t), horizon=t, seed=seed)
    cfg_b = IntegratorConfig(dt=min(dt, t), horizon=t, seed=seed + 10 ** 6)
    res_a = integrate_ensemble(model, spec, cfg_a, x + h, samples)
    res_b = integrate_ensemble(model, spec, cfg_b, x, samples)
    ma, se_a = _mean_se(phi(model, res_a.states))
    lhs = abs(ma) ** p
    lhs_se = p * abs(ma) ** (p - 1.0) * se_a
    mb, se_b = _mean_se(np.abs(phi(model, res_b.states)) ** p)
    return _report("harnack", "INEQ-HARNACK", lhs, lhs_se, mb * blow,
                   se_b * blow, scenario, seed, note=f"p={p:g} t={t:g}")


def _mehler_scalar(model, t, x, phi) -> float:
    return mehler_oracle(model, t, x, phi)


def _mehler_abs_power(model, t, x, phi, p) -> float:
    """P(t) |phi|^p (x) for the zero-drift scenario, plain phi only."""
    if phi.offset != 0.0 or phi.scale != 1.0:
        raise ValueError("affine test functions unsupported here")
    mean, var = mehler_mean_variance(model, t, x)
    if phi.kind == "cylindrical_tanh" and phi.directions.shape[0] == 1:
        if not phi._basis_aligned():
            raise ValueError("oracle needs a basis-aligned direction")
        k = int(np.nonzero(phi.directions[0])[0][0])
        s = phi.directions[0][k]
        return _gh_expectation(mean[k], var[k],
                               lambda z: np.abs(np.tanh(s * z)) ** p)
    if phi.kind == "exp_quadratic":
        lg = gaussian_quadratic_log_moment(p * phi.theta, p * phi.cquad,
                                           mean, var)
        return math.inf if math.isinf(lg) else math.exp(p * phi.log_amp + lg)
    raise ValueError(f"no |.|^p oracle for kind {phi.kind!r}")


# -------------------------------------------------------------- concentration

def _wilson(k: int, n: int, z: float) -> tuple:
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    hw = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - hw), min(1.0, center + hw)


def concentration_curve(model: SpectralModel, ensemble: MeasureEnsemble,
                        g: TestFunction, constants: ConstantsPack,
                        r_variant: bool = True, grid_size: int = 12,
                        k_sigma: float = K_SIGMA) -> dict:
    """Tail rows (t, empirical, Wilson band, Gaussian bound) for plotting.

    The deviation grid stops where zero successes can no longer resolve
    the bound; `degraded` records that truncation.
    """
    lip = certified_r_lipschitz(model, g, unweighted=not r_variant)
    rate = constants.concentration_rate if r_variant else constants.concentration_rate_h
    vals = g(model, ensemble.points)
    if lip > 0:
        vals = vals / lip
    center = float(vals.mean())
    dev = vals - center
    n = len(vals)
    # smallest empirically resolvable survival probability at z sigma
    floor = _wilson(0, n, k_sigma)[1]
    t_max_resolvable = math.sqrt(-math.log(floor) / rate)
    sigma = float(dev.std())
    degraded = False
    if sigma == 0.0:
        grid = np.linspace(0.5, 2.0, grid_size) / math.sqrt(rate)
        t_hi = float(grid[-1])
    else:
        t_lo = 0.5 * sigma
        requested_max = 6.0 * sigma
        t_hi = min(requested_max, t_max_resolvable)
        degraded = t_hi < requested_max
        if t_hi <= t_lo:
            t_hi, degraded = 2.0 * t_lo, True
        grid = np.linspace(t_lo, t_hi, grid_size)
    rows = []
    for tt in grid:
        k = int(np.sum(dev >= tt))
        lo, hi = _wilson(k, n, k_sigma)
        rows.append({"t": float(tt), "empirical": k / n, "wilson_lo": lo,
                     "wilson_hi": hi, "bound": math.exp(-rate * tt * tt)})
    return {"rows": rows, "degraded": degraded, "t_hi": float(t_hi),
            "rate": rate, "lip": lip}


def check_concentration(model: SpectralModel, ensemble: MeasureEnsemble,
                        g: TestFunction, constants: ConstantsPack,
                        r_variant: bool = True, scenario: str = "",
                        seed: int = 0, grid_size: int = 12,
                        k_sigma: float = K_SIGMA) -> InequalityReport:
    """nu(g >= mean + t) <= exp(-rate t^2) for 1-Lipschitz g.

    rate = 1/(16 sqrt2 C) in the weighted norm, with C' = ||R|| C for the
    unweighted variant.  Empirical survival with Wilson intervals on the
    concentration_curve grid.
    """
    curve = concentration_curve(model, ensemble, g, constants, r_variant,
                                grid_size, k_sigma)
    worst = None
    violation = False
    all_below = True
    for row in curve["rows"]:
        if row["wilson_lo"] > row["bound"]:
            violation = True
        if row["wilson_hi"] > row["bound"]:
            all_below = False
        gap = row["wilson_hi"] - row["bound"]
        if worst is None or gap > worst[0]:
            worst = (gap, row)
    row = worst[1]
    verdict = "fail" if violation else ("pass" if all_below else "pass_within_noise")
    rep = _report("concentration_tail", "INEQ-CONC-TAIL", row["wilson_hi"], 0.0,
                  row["bound"], 0.0, scenario, seed,
                  note=(f"worst t={row['t']:.3g} empirical={row['empirical']:.3g} "
                        f"validated t<={curve['t_hi']:.3g}"),
                  degraded=curve["degraded"])
    return replace(rep, verdict=verdict)


def _exp_moment(vals_sq: np.ndarray, lam: float) -> tuple:
    """Empirical E[e^{lam s}], stderr, and a stability flag via halves."""
    expo = lam * vals_sq
    big = expo.max()
    if big > 700:          # overflow: certainly unstable
        return math.inf, math.inf, False, 1.0
    e = np.exp(expo)
    mean, se = _mean_se(e)
    half = len(e) // 2
    a, sa = _mean_se(e[:half])
    b, sb = _mean_se(e[half:2 * half])
    stable = abs(a - b) <= 3.0 * math.hypot(sa, sb)
    top_share = float(e.max() / e.sum())
    return mean, se, stable and top_share < 0.5, top_share


def _gaussian_exp_moment(model: SpectralModel, lam: float,
                         r_variant: bool) -> float:
    """Exact E[e^{lam ||x||^2}] under the zero-drift invariant Gaussian."""
    qvar = model.r ** 2 / (2.0 * np.abs(model.lambdas))
    scale = 1.0 / model.r ** 2 if r_variant else np.ones(model.n)
    lg = gaussian_quadratic_log_moment(np.zeros(model.n), lam * scale,
                                       np.zeros(model.n), qvar)
    return math.inf if math.isinf(lg) else math.exp(lg)


def check_fernique(model: SpectralModel, ensemble: MeasureEnsemble,
                   lambda_grid: Sequence[float], constants: ConstantsPack,
                   r_variant: bool = True, scenario: str = "",
                   seed: int = 0) -> list:
    """E[e^{lam ||x||^2}] finite for lam below 1/(16 sqrt2 C).

    Gaussian-oracle ensembles are compared against the exact product
    formula; other provenances use the halving-stability diagnostic.
    """
    pts = ensemble.points
    sq = (r_norm(model, pts) ** 2 if r_variant
          else np.sum(pts ** 2, axis=-1))
    reports = []
    for lam in lambda_grid:
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        mean, se, stable, share = _exp_moment(sq, lam)
        note = f"lam={lam:g} top_share={share:.2g}"
        if ensemble.provenance == "gaussian_oracle":
            exact = _gaussian_exp_moment(model, lam, r_variant)
            if math.isinf(exact):
                rep = _report("fernique", "INEQ-FERNIQUE", mean, se, exact, 0.0,
                              scenario, seed, note=note + " oracle=divergent")
                rep = replace(rep, verdict="fail")
            else:
                diff = abs(mean - exact)
                verdict = "pass" if (stable and diff <= 3.0 * se) else "fail"
                rep = _report("fernique", "INEQ-FERNIQUE", mean, se, exact, 0.0,
                              scenario, seed, note=note + " oracle=exact")
                rep = replace(rep, verdict=verdict)
        else:
            verdict = "pass" if (stable and math.isfinite(mean)) else "fail"
            rep = _report("fernique", "INEQ-FERNIQUE", mean, se, mean, se,
                          scenario, seed, note=note + " stability")
            rep = replace(rep, verdict=verdict)
        below = lam < constants.fernique_threshold
        rep = replace(rep, note=rep.note + (" below_threshold" if below
                                            else " above_threshold"),
                      expected_failure=rep.expected_failure)
        reports.append(rep)
    return reports


def check_supercontractivity_integrals(model: SpectralModel,
                                       ensemble: MeasureEnsemble,
                                       lambda_grid: Sequence[float],
                                       scenario: str = "", seed: int = 0,
                                       expected_failure: bool = False) -> InequalityReport:
    """E[e^{lam ||x||_R^2}] must stay finite for every lam > 0.

    Walks an increasing grid; reports the largest validated coefficient.
    Gaussian-oracle ensembles decide finiteness exactly, so the check
    detects the divergence wall of non-supercontractive scenarios.
    """
    sq = r_norm(model, ensemble.points) ** 2
    lams = sorted(lambda_grid)
    largest_ok = 0.0
    first_bad = None
    for lam in lams:
        if ensemble.provenance == "gaussian_oracle":
            exact = _gaussian_exp_moment(model, lam, r_variant=True)
            ok = math.isfinite(exact)
        else:
            _, _, stable, _ = _exp_moment(sq, lam)
            ok = stable
        if ok:
            largest_ok = lam
        elif first_bad is None:
            first_bad = lam
    note = f"largest_validated_lam={largest_ok:g}"
    if first_bad is not None:
        note += f" first_failing_lam={first_bad:g}"
    rep = _report("supercontractivity_integrals", "INEQ-SUPER-EXP",
                  largest_ok, 0.0, max(lams), 0.0, scenario, seed, note=note,
                  expected_failure=expected_failure)
    verdict = "pass" if first_bad is None else "fail"
    return replace(rep, verdict=verdict, margin=largest_ok - max(lams))


# ---------------------------------------------------- pointwise semigroup bound

def check_semigroup_log_sobolev(model: SpectralModel, spec: DriftSpec, t: float,
                                x: np.ndarray, phi: TestFunction,
                                constants: ConstantsPack, samples: int,
                                seed: int = 0, scenario: str = "",
                                dt: float = DEFAULT_DT,
                                floor: float = 0.0) -> InequalityReport:
    """P(t)(f^2 ln f^2)(x) <= P(t)f^2 ln P(t)f^2 + C(t) P(t)||grad_R f||_R^2.

    One trajectory set feeds all three expectations (common random
    numbers); the joint stderr comes from the sample covariance of the
    three integrands.  f^2 = phi^2 + floor^2 keeps f away from zero; the
    floored gradient is phi^2/(phi^2+floor^2) ||grad_R phi||_R^2.
    """
    x = np.asarray(x, dtype=float)
    cfg = IntegratorConfig(dt=min(dt, t), horizon=t, seed=seed)
    res = integrate_ensemble(model, spec, cfg, x, samples)
    pts = res.states[~res.diverged]
    vals = phi(model, pts)
    fsq = vals ** 2 + floor ** 2
    if np.any(fsq <= 0):
        raise ValueError("f must be bounded away from zero; pass a floor")
    u = fsq * np.log(fsq)
    gsq = weighted_gradient_squared(model, phi, pts)
    w = np.where(fsq > 0, vals ** 2 / fsq, 1.0) * gsq
    ct = constants.smoothing_time_constant(t)
    m = len(pts)
    a, b, c = u.mean(), fsq.mean(), w.mean()
    lhs = float(a)
    rhs = float(b * math.log(b) + ct * c)
    grad_vec = np.array([-1.0, math.log(b) + 1.0, ct])
    cov = np.cov(np.vstack([u, fsq, w]))
    var_margin = float(grad_vec @ cov @ grad_vec) / m
    se = math.sqrt(max(var_margin, 0.0))
    margin = rhs - lhs
    rep = InequalityReport(name="semigroup_log_sobolev",
                           paper_eq="INEQ-SEMIGROUP-LSI", lhs=lhs,
                           lhs_se=float(np.std(u, ddof=1) / math.sqrt(m)),
                           rhs=rhs, rhs_se=se, margin=margin,
                           verdict=_verdict(margin, se), scenario=scenario,
                           seed=seed, note=f"t={t:g} C(t)={ct:.4g}")
    return rep


# ----------------------------------------------------------- epsilon entropy law

def _log_mean_exp(expo: np.ndarray) -> float:
    big = float(expo.max())
    return big + math.log(float(np.mean(np.exp(expo - big))))


def constructive_norm_bound(model: SpectralModel, ensemble: MeasureEnsemble,
                            t: float, constants: ConstantsPack,
                            p: float = 2.0, q: float = 4.0) -> float:
    """log of the L^p -> L^q smoothing-norm proxy M_{p,q}(t).

    Built from the Harnack route: with kappa the Harnack exponent at
    (p, t) and rbar a radius whose R-ball holds more than 2^{-p} of the
    mass (30th percentile),

        log M = ln 2 + 2 kappa rbar^2 / p
                + (1/q) log E[exp(2 kappa q ||x||_R^2 / p)].
    """
    kappa = constants.harnack_exponent(p, t)
    radii = r_norm(model, ensemble.points)
    rbar = float(np.quantile(radii, 0.30))
    expo = (2.0 * kappa * q / p) * radii ** 2
    return math.log(2.0) + 2.0 * kappa * rbar ** 2 / p + _log_mean_exp(expo) / q


def check_eps_log_sobolev(model: SpectralModel, ensemble: MeasureEnsemble,
                          phi: TestFunction, eps_grid: Sequence[float],
                          constants: ConstantsPack, scenario: str = "",
                          seed: int = 0, p: float = 2.0,
                          q: float = 4.0) -> list:
    """int f^2 ln|f| - ||f||^2 ln||f|| <= eps D(f) + beta(eps) ||f||^2.

    For each eps, t solves eps = [p(q-1)/(q-p)] C(t) (clamped at
    10/|zeta_R| past the constructive range) and
    beta(eps) = [qp/(q-p)] log M_{p,q}(t).  beta is scenario-empirical.
    """
    factor = p * (q - 1.0) / (q - p)
    beta_factor = q * p / (q - p)
    sup_eps = factor * 3.0 / abs(constants.zeta_R)
    pts = ensemble.points
    vals = phi(model, pts)
    fsq = vals ** 2
    ent2, ent2_se = entropy(model, ensemble, phi, 2.0)
    lhs = 0.5 * ent2
    lhs_se = 0.5 * ent2_se
    dval, dval_se = _mean_se(weighted_gradient_squared(model, phi, pts))
    nsq, nsq_se = _mean_se(fsq)
    reports = []
    for eps in eps_grid:
        if eps <= 0:
            raise ValueError("eps must be positive")
        clamped = eps >= sup_eps * (1.0 - 1e-12)
        if clamped:
            t = 10.0 / abs(constants.zeta_R)
        else:
            t = math.log1p(-eps * abs(constants.zeta_R) / (3.0 * factor)) / (
                2.0 * constants.zeta_R)
        log_m = constructive_norm_bound(model, ensemble, t, constants, p, q)
        beta = beta_factor * log_m
        rhs = eps * dval + beta * nsq
        rhs_se = math.hypot(eps * dval_se, beta * nsq_se)
        note = f"eps={eps:g} t={t:.4g} beta={beta:.4g}"
        if clamped:
            note += " t_clamped"
        reports.append(_report("eps_log_sobolev", "INEQ-EPS-LSI", lhs, lhs_se,
                               rhs, rhs_se, scenario, seed, note=note))
    return reports


# ---------------------------------------------------------- gradient commutation

def check_gradient_estimate(model: SpectralModel, spec: DriftSpec, t: float,
                            x: np.ndarray, phi: TestFunction,
                            constants: ConstantsPack, samples: int,
                            seed: int = 0, scenario: str = "",
                            dt: float = DEFAULT_DT) -> InequalityReport:
    """||grad_R P(t)phi||_R^2 <= e^{2 zeta_R t} P(t)||grad_R phi||_R^2."""
    x = np.asarray(x, dtype=float)
    grad = estimate_gradient_semigroup(model, spec, t, x, phi, samples,
                                       seed=seed, dt=dt)
    lhs = float(np.sum(grad.value ** 2))
    lhs_se = 2.0 * float(np.linalg.norm(grad.value * grad.stderr))
    if t == 0.0:
        rhs = float(weighted_gradient_squared(model, phi, x[None, :])[0])
        return _report("gradient_estimate", "INEQ-GRAD", lhs, lhs_se, rhs, 0.0,
                       scenario, seed, note="t=0")
    cfg = IntegratorConfig(dt=min(dt, t), horizon=t, seed=seed + 10 ** 6)
    res = integrate_ensemble(model, spec, cfg, x, samples)
    gsq = weighted_gradient_squared(model, phi, res.states[~res.diverged])
    m, se = _mean_se(gsq)
    psi = constants.gradient_decay(t)
    return _report("gradient_estimate", "INEQ-GRAD", lhs, lhs_se, psi * m,
                   psi * se, scenario, seed, note=f"t={t:g}")


# -------------------------------------------------------------- ultraboundedness

def check_ultrabounded(model: SpectralModel, spec: DriftSpec,
                       ensemble: MeasureEnsemble, t: float, lam: float,
                       p: float = math.inf, samples: int = 256, seed: int = 0,
                       scenario: str = "", n_starts: int = 32,
                       dt: float = 2e-3,
                       expected_failure: bool = False) -> InequalityReport:
    """Two sub-checks for boundedness of P(t) e^{lam ||x||_R^2}.

    p selects the norm of the start-point aggregation: the default inf
    takes the supremum over starts, finite p the empirical L^p mean.

    (a) the supremum over ensemble-drawn starts of the Monte Carlo
        estimate is finite and stable when the sample count doubles; for
        the zero-drift scenario the Gaussian closed form over expanding
        radii decides instead (and reveals the blow-up of the
        non-ultrabounded case);
    (b) with a super-dissipativity certificate (a, power law), coupled
        pairs obey the pathwise squared-distance envelope
        2 phi^{-1}(2a) + psi^{-1}(t/4) for separations up to 1e2.
    """
    phi_lam = tf_exp_quadratic(theta=np.zeros(model.n),
                               cquad=lam / model.r ** 2)
    note_parts = [f"lam={lam:g} t={t:g}"]
    if spec.kind == "zero":
        radii = [1.0, 3.0, 10.0, 30.0, 100.0]
        direction = np.zeros(model.n)
        direction[0] = model.r[0]      # unit weighted norm
        logs = []
        for rho in radii:
            mean, var = mehler_mean_variance(model, t, rho * direction)
            lg = gaussian_quadratic_log_moment(phi_lam.theta, phi_lam.cquad,
                                               mean, var)
            logs.append(lg)
        grew = logs[-1] > logs[0] + 10.0 or any(math.isinf(v) for v in logs)
        lhs = logs[-1]
        note_parts.append("oracle_expanding_radii " +
                          ("diverges" if grew else "bounded"))
        rep = _report("ultrabounded", "INEQ-ULTRA", lhs, 0.0,
                      logs[0] + 10.0, 0.0, scenario, seed,
                      note=" ".join(note_parts),
                      expected_failure=expected_failure)
        return replace(rep, verdict="fail" if grew else "pass")

    stride = max(1, ensemble.count // n_starts)
    starts = ensemble.points[::stride][:n_starts]
    sups = []
    for factor, sub_seed in ((1, seed), (2, seed + 10 ** 6)):
        cfg = IntegratorConfig(dt=min(dt, t), horizon=t, seed=sub_seed)
        x0 = np.repeat(starts, samples * factor, axis=0)
        res = integrate_ensemble(model, spec, cfg, x0, len(x0))
        vals = phi_lam(model, res.states).reshape(len(starts), samples * factor)
        means = vals.mean(axis=1)
        ses = vals.std(axis=1, ddof=1) / math.sqrt(samples * factor)
        if math.isinf(p):
            k = int(np.argmax(means))
            sups.append((float(means[k]), float(ses[k])))
        else:
            agg = float(np.mean(means ** p) ** (1.0 / p))
            agg_se = float(np.mean(ses ** 2) ** 0.5)
            sups.append((agg, agg_se))
    (v1, s1), (v2, s2) = sups
    stable = (math.isfinite(v1) and math.isfinite(v2)
              and abs(v1 - v2) <= 3.0 * math.hypot(s1, s2))
    note_parts.append(f"sup_doubling |{v1:.4g}-{v2:.4g}|")
    pair_ok, pair_note = _coupled_pair_envelope(model, spec, seed)
    note_parts.append(pair_note)
    ok = stable and pair_ok
    rep = _report("ultrabounded", "INEQ-ULTRA", v2, math.hypot(s1, s2), v2,
                  0.0, scenario, seed, note=" ".join(note_parts),
                  expected_failure=expected_failure)
    return replace(rep, verdict="pass" if ok else "fail", margin=0.0)


def _coupled_pair_envelope(model: SpectralModel, spec: DriftSpec,
                           seed: int) -> tuple:
    """Pathwise check of ||X - Y||_R^2 <= 2 phi^{-1}(2a) + psi^{-1}(t/4)."""
    if spec.super is None:
        return True, "no_super_certificate"
    pair = spec.super
    rng = np.random.default_rng(np.random.SeedSequence((seed, 777)))
    dirs = [np.eye(model.n)[0], rng.normal(size=model.n)]
    worst = math.inf
    for sep in (1.0, 10.0, 100.0):
        for d in dirs:
            d_unit = d / r_norm(model, d)
            x0 = 0.3 * np.ones(model.n)
            y0 = x0 + sep * d_unit
            # stiff transient first: the separation collapses from far out
            xa, ya = x0, y0
            t_accum = 0.0
            for phase_dt, phase_T in ((1e-6, 0.01), (1e-3, 0.99)):
                cfg = IntegratorConfig(dt=phase_dt, horizon=phase_T,
                                       seed=seed, record_stride=10 ** 9)
                traj_x, traj_y = integrate_coupled_pair(model, spec, cfg, xa, ya)
                if traj_x.diverged or traj_y.diverged:
                    return False, "pair_diverged"
                xa, ya = traj_x.final, traj_y.final
                t_accum += phase_T
                gap = float(r_norm(model, xa - ya) ** 2)
                bound = (2.0 * pair.phi_inverse(2.0 * pair.a)
                         + pair.psi_inverse(t_accum / 4.0))
                slack = bound * (1.0 + 10.0 * phase_dt) + 1e-9 - gap
                worst = min(worst, slack)
                if slack < 0:
                    return False, f"pair_envelope_violated sep={sep:g}"
    return True, f"pair_envelope_ok min_slack={worst:.3g}"
