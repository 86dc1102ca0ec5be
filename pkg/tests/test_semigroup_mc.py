"""Semigroup estimators against Gaussian closed forms and each other."""

import math

import numpy as np
import pytest

from simlab.spectral_core import build_dirichlet_laplacian, ou_model, r_norm
from simlab.drift_models import kernel_drift, nemytskii_drift, zero_drift
from simlab.sde_integrator import IntegratorConfig, integrate_ensemble
from simlab.semigroup_mc import (
    EstimateError,
    MeasureEnsemble,
    StationarityError,
    apply_generator,
    estimate_gradient_semigroup,
    estimate_semigroup,
    gaussian_invariant_sample,
    gaussian_quadratic_log_moment,
    gibbs_oracle_sample,
    invariance_battery,
    mehler_log_oracle,
    mehler_mean_variance,
    mehler_oracle,
    mehler_pushforward,
    sample_invariant,
    tf_constant,
    tf_custom_grid,
    tf_cylindrical_tanh,
    tf_exp_quadratic,
    tf_linear,
    tf_r_norm_squared,
    write_measure_csv,
)

CUBIC = nemytskii_drift((0.0, 0.0, 0.0, 1.0), zeta_R=-math.pi ** 2)
ZERO = zero_drift()


# ---------------------------------------------------------------- observables

def test_exp_quadratic_sup_bound():
    n = 3
    phi = tf_exp_quadratic(theta=0.5 * np.eye(n)[0], cquad=-0.25 * np.ones(n))
    assert phi.sup_bound == pytest.approx(math.exp(0.25), rel=1e-12)
    unbounded = tf_exp_quadratic(theta=np.ones(n))
    assert math.isinf(unbounded.sup_bound)


def test_cylindrical_tanh_direction_count():
    with pytest.raises(ValueError):
        tf_cylindrical_tanh(np.eye(4))


def test_custom_grid_matches_h_norm_squared():
    m = build_dirichlet_laplacian(4)
    x = np.array([0.4, -0.2, 0.1, 0.05])
    phi = tf_custom_grid(lambda v: v ** 2, profile_deriv=lambda v: 2.0 * v)
    assert phi(m, x) == pytest.approx(float(np.sum(x ** 2)), rel=1e-12)
    assert np.allclose(phi.gradient(m, x), 2.0 * x, atol=1e-12)


@pytest.mark.parametrize("which", ["exp", "tanh", "rsq", "grid_fd"])
def test_gradients_match_central_differences(which):
    m = build_dirichlet_laplacian(4, beta=0.5)
    x = np.array([0.3, -0.5, 0.2, 0.1])
    if which == "exp":
        phi = tf_exp_quadratic(theta=np.array([0.4, 0.0, -0.2, 0.1]),
                               cquad=np.array([-0.3, -0.1, 0.0, -0.2]))
    elif which == "tanh":
        phi = tf_cylindrical_tanh(np.vstack([np.eye(4)[0], 0.7 * np.eye(4)[2]]))
    elif which == "rsq":
        phi = tf_r_norm_squared(shift=0.1 * np.ones(4))
    else:
        phi = tf_custom_grid(np.cos)   # no derivative given, FD fallback
    g = phi.gradient(m, x)
    h = 1e-5
    fd = np.empty(4)
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        fd[k] = (phi(m, x + e) - phi(m, x - e)) / (2 * h)
    assert np.allclose(g, fd, atol=1e-6 * (1 + np.abs(fd).max()))
    assert np.allclose(phi.r_gradient(m, x), m.r ** 2 * g, atol=1e-14)


def test_battery_is_bounded():
    m = build_dirichlet_laplacian(3)
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(50, 3)) * 2.0
    for phi in invariance_battery(m):
        assert math.isfinite(phi.sup_bound)
        assert np.all(np.abs(phi(m, pts)) <= phi.sup_bound + 1e-12)


# ------------------------------------------------------------------ estimator

def test_constant_estimate_is_exact():
    m = ou_model()
    est = estimate_semigroup(m, ZERO, t=0.7, x=np.array([0.3]),
                             phi=tf_constant(2.5), samples=500, seed=1)
    assert est.value == pytest.approx(2.5, abs=1e-14)
    assert est.stderr == pytest.approx(0.0, abs=1e-14)


def test_time_zero_returns_point_value():
    m = ou_model()
    phi = tf_r_norm_squared()
    est = estimate_semigroup(m, ZERO, t=0.0, x=np.array([0.6]), phi=phi,
                             samples=100, seed=0)
    assert est.value == pytest.approx(0.36, abs=1e-14)
    assert est.stderr == 0.0


def test_ou_second_moment_estimate():
    m = ou_model()
    phi = tf_r_norm_squared()
    est = estimate_semigroup(m, ZERO, t=1.0, x=np.zeros(1), phi=phi,
                             samples=40000, seed=3, dt=0.05)
    exact = 0.5 * -math.expm1(-2.0)
    assert abs(est.value - exact) <= 3.0 * est.stderr
    assert est.stderr < 0.01


def test_divergent_ensemble_raises():
    m = build_dirichlet_laplacian(2)
    bad = kernel_drift(factors=np.eye(2)[:1], gains=[60.0], zeta_F=60.0)
    with pytest.raises(EstimateError):
        estimate_semigroup(m, bad, t=1.0, x=np.array([50.0, 0.0]),
                           phi=tf_r_norm_squared(cap=10.0), samples=64,
                           seed=0, dt=0.01)


# -------------------------------------------------------------------- oracles

def test_mehler_exponential_linear_example():
    m = ou_model()
    theta, t, x0 = 0.7, 0.9, 0.3
    phi = tf_exp_quadratic(theta=np.array([theta]))
    mean = math.exp(-t) * x0
    q = 0.5 * -math.expm1(-2.0 * t)
    expect = math.exp(theta * mean + 0.5 * theta ** 2 * q)
    got = mehler_oracle(m, t, np.array([x0]), phi)
    assert got == pytest.approx(expect, rel=1e-12)


def test_mehler_long_time_second_moment():
    m = ou_model()
    got = mehler_oracle(m, 60.0, np.array([1.7]), tf_r_norm_squared())
    assert got == pytest.approx(0.5, abs=1e-10)


def test_mehler_odd_function_at_origin():
    m = build_dirichlet_laplacian(3, beta=0.5)
    phi = tf_cylindrical_tanh(np.eye(3)[0])
    assert abs(mehler_oracle(m, 0.8, np.zeros(3), phi)) < 1e-14


def test_mehler_divergent_integral_is_inf():
    m = ou_model()
    phi = tf_exp_quadratic(theta=np.zeros(1), cquad=np.array([1.1]))
    assert math.isinf(mehler_oracle(m, 50.0, np.zeros(1), phi))
    assert math.isinf(mehler_log_oracle(m, 50.0, np.zeros(1), phi))


def test_log_moment_against_quadrature():
    mean, var = np.array([0.3]), np.array([0.4])
    theta, c = np.array([0.8]), np.array([-0.6])
    grid = np.linspace(-12, 12, 20001)
    dens = np.exp(-(grid - mean[0]) ** 2 / (2 * var[0])) / math.sqrt(2 * math.pi * var[0])
    val = np.trapezoid(np.exp(theta[0] * grid + c[0] * grid ** 2) * dens, grid)
    assert gaussian_quadratic_log_moment(theta, c, mean, var) == pytest.approx(
        math.log(val), abs=1e-8)


def test_mehler_matches_monte_carlo_tanh():
    m = ou_model()
    phi = tf_cylindrical_tanh(np.ones(1))
    x = np.array([0.4])
    est = estimate_semigroup(m, ZERO, t=0.7, x=x, phi=phi, samples=20000,
                             seed=7, dt=0.05)
    exact = mehler_oracle(m, 0.7, x, phi)
    assert abs(est.value - exact) <= 3.0 * est.stderr


def test_pushforward_composes_like_the_semigroup():
    m = build_dirichlet_laplacian(2, beta=0.5)
    phi = tf_exp_quadratic(theta=np.array([0.5, -0.2]),
                           cquad=np.array([-0.4, -0.1]))
    direct = mehler_pushforward(m, 0.7, phi)
    nested = mehler_pushforward(m, 0.4, mehler_pushforward(m, 0.3, phi))
    assert np.allclose(direct.theta, nested.theta, rtol=1e-12)
    assert np.allclose(direct.cquad, nested.cquad, rtol=1e-12)
    assert direct.log_amp == pytest.approx(nested.log_amp, rel=1e-12)
    for x in (np.zeros(2), np.array([0.6, -0.3])):
        assert direct(m, x) == pytest.approx(mehler_oracle(m, 0.7, x, phi),
                                             rel=1e-12)


# ----------------------------------------------------------- invariant measure

def test_ergodic_zero_drift_variances():
    m = build_dirichlet_laplacian(3, beta=0.5)
    ens = sample_invariant(m, ZERO, count=4000, seed=11)
    assert ens.provenance == "ergodic"
    target = m.r ** 2 / (2.0 * np.abs(m.lambdas))
    blocks = np.array_split(ens.points ** 2, 20)
    bm = np.array([b.mean(axis=0) for b in blocks])
    se = bm.std(axis=0, ddof=1) / math.sqrt(len(bm))
    assert np.all(np.abs(ens.points.var(axis=0) - target) <= 4.0 * se)


def test_ergodic_sampler_is_deterministic():
    m = ou_model()
    a = sample_invariant(m, ZERO, count=500, seed=4)
    b = sample_invariant(m, ZERO, count=500, seed=4)
    assert np.array_equal(a.points, b.points)


def test_stationarity_diagnostic_catches_cold_start():
    m = ou_model(lam=-0.05)   # variance 10, relaxation time 10
    with pytest.raises(StationarityError):
        sample_invariant(m, ZERO, burn_in=0.0, thinning=0.01, count=2000,
                         seed=2, dt=0.01)


def test_gaussian_oracle_sampler_moments():
    m = build_dirichlet_laplacian(4, beta=0.5)
    ens = gaussian_invariant_sample(m, count=60000, seed=9)
    target = m.r ** 2 / (2.0 * np.abs(m.lambdas))
    se = target * math.sqrt(2.0 / ens.count)
    assert ens.provenance == "gaussian_oracle"
    assert np.all(np.abs(ens.points.var(axis=0) - target) <= 4.0 * se)


def test_provenance_is_validated():
    with pytest.raises(ValueError):
        MeasureEnsemble(points=np.zeros((10, 2)), provenance="guesswork", seed=0)


def test_weights_are_uniform():
    ens = MeasureEnsemble(points=np.zeros((8, 2)), provenance="gaussian_oracle",
                          seed=0)
    assert ens.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(ens.weights == ens.weights[0])


# ----------------------------------------------------------------- Gibbs ULA

def test_gibbs_linear_case_recovers_gaussian():
    m = build_dirichlet_laplacian(2)
    ens = gibbs_oracle_sample(m, b_coeffs=(0.0,), count=3000, step=0.02, seed=5)
    target = 1.0 / (2.0 * np.abs(m.lambdas))
    blocks = np.array_split(ens.points ** 2, 20)
    bm = np.array([b.mean(axis=0) for b in blocks])
    se = bm.std(axis=0, ddof=1) / math.sqrt(len(bm))
    assert np.all(np.abs(ens.points.var(axis=0) - target) <= 4.0 * se)


def test_gibbs_one_dimensional_quadrature_oracle():
    m = build_dirichlet_laplacian(1)
    ens = gibbs_oracle_sample(m, b_coeffs=(0.0, 0.0, 0.0, 1.0), count=4000,
                              step=0.02, seed=6)
    # direct quadrature of exp(-|lambda_1| x^2 - 2 U(x)), U from B = z^4/4
    v = math.sqrt(2.0) * np.sin(math.pi * m.grid)
    c4 = float(np.sum(v ** 4)) * m.quad_weight
    grid = np.linspace(-3, 3, 4001)
    log_dens = -abs(m.lambdas[0]) * grid ** 2 - 2.0 * 0.25 * c4 * grid ** 4
    dens = np.exp(log_dens - log_dens.max())
    z = np.trapezoid(dens, grid)
    var_exact = float(np.trapezoid(grid ** 2 * dens, grid) / z)
    blocks = np.array_split(ens.points[:, 0] ** 2, 20)
    bm = np.array([b.mean() for b in blocks])
    se = bm.std(ddof=1) / math.sqrt(len(bm))
    assert abs(ens.points[:, 0].var() - var_exact) <= 4.0 * se
    mean_se = ens.points[:, 0].std() / math.sqrt(len(bm) * 10)
    assert abs(ens.points[:, 0].mean()) <= 4.0 * mean_se


def test_gibbs_cubic_shrinks_every_mode_variance():
    m = build_dirichlet_laplacian(4)
    base = gibbs_oracle_sample(m, b_coeffs=(0.0,), count=2500, step=0.02, seed=8)
    cubic = gibbs_oracle_sample(m, b_coeffs=(0.0, 0.0, 0.0, 1.0), count=2500,
                                step=0.02, seed=8)
    assert np.all(cubic.points.var(axis=0) < base.points.var(axis=0))


def test_gibbs_step_halving_moves_less_than_stderr():
    m = build_dirichlet_laplacian(2)
    a = gibbs_oracle_sample(m, b_coeffs=(0.0, 0.0, 0.0, 1.0), count=4000,
                            step=0.02, seed=12)
    b = gibbs_oracle_sample(m, b_coeffs=(0.0, 0.0, 0.0, 1.0), count=4000,
                            step=0.01, seed=12)
    va, vb = a.points.var(axis=0), b.points.var(axis=0)
    se = np.sqrt(va ** 2 * 2 / a.count + vb ** 2 * 2 / b.count)
    assert np.all(np.abs(va - vb) <= se)


def test_gibbs_requires_unit_weights():
    m = build_dirichlet_laplacian(2, beta=0.5)
    with pytest.raises(ValueError):
        gibbs_oracle_sample(m, b_coeffs=(0.0,), count=100, step=0.02, seed=0)


def test_ergodic_matches_gibbs_for_cubic():
    m = build_dirichlet_laplacian(4)
    erg = sample_invariant(m, CUBIC, count=3000, seed=13)
    ula = gibbs_oracle_sample(m, b_coeffs=(0.0, 0.0, 0.0, 1.0), count=3000,
                              step=0.02, seed=13)
    for k in range(4):
        va = float(erg.points[:, k].var())
        vb = float(ula.points[:, k].var())
        se = math.sqrt(va ** 2 * 2 / erg.count + vb ** 2 * 2 / ula.count)
        # correlated chains understate the plain-variance stderr; scale by 2
        assert abs(va - vb) <= 4.0 * 2.0 * se


# ------------------------------------------------------------------- gradient

def test_gradient_linear_functional_is_exact():
    m = build_dirichlet_laplacian(3)
    phi = tf_linear(np.eye(3)[0])
    est = estimate_gradient_semigroup(m, ZERO, t=0.3, x=np.array([0.2, -0.1, 0.4]),
                                      phi=phi, samples=400, seed=0, dt=0.01)
    expect = math.exp(m.lambdas[0] * 0.3) * np.eye(3)[0]
    assert np.allclose(est.value, expect, atol=1e-12)
    assert np.allclose(est.stderr, 0.0, atol=1e-12)


def test_gradient_weighted_basis_scaling():
    m = build_dirichlet_laplacian(2, beta=0.5)
    phi = tf_linear(np.eye(2)[0])
    est = estimate_gradient_semigroup(m, ZERO, t=0.2, x=np.zeros(2), phi=phi,
                                      samples=200, seed=1, dt=0.01)
    assert est.value[0] == pytest.approx(m.r[0] * math.exp(m.lambdas[0] * 0.2),
                                         rel=1e-12)
    assert est.value[1] == pytest.approx(0.0, abs=1e-12)


def test_gradient_of_constant_vanishes():
    m = ou_model()
    est = estimate_gradient_semigroup(m, ZERO, t=0.5, x=np.array([0.7]),
                                      phi=tf_constant(3.0), samples=200, seed=2)
    assert np.allclose(est.value, 0.0, atol=1e-14)


def test_gradient_matches_common_noise_finite_difference():
    m = build_dirichlet_laplacian(4)
    phi = tf_cylindrical_tanh(np.eye(4)[0])
    x = 0.3 * np.ones(4)
    t, dt, samples, seed = 0.4, 0.01, 4000, 14
    grad = estimate_gradient_semigroup(m, CUBIC, t, x, phi, samples, seed=seed,
                                       dt=dt)
    eps = 5e-3
    h = m.r[0] * np.eye(4)[0]
    cfg = IntegratorConfig(dt=dt, horizon=t, seed=seed)
    up = integrate_ensemble(m, CUBIC, cfg, x + eps * h, samples)
    dn = integrate_ensemble(m, CUBIC, cfg, x - eps * h, samples)
    diffs = (phi(m, up.states) - phi(m, dn.states)) / (2 * eps)
    fd = float(diffs.mean())
    fd_se = float(diffs.std(ddof=1) / math.sqrt(samples))
    joint = math.sqrt(fd_se ** 2 + grad.stderr[0] ** 2)
    assert abs(grad.value[0] - fd) <= 3.0 * joint + 1e-4


# ------------------------------------------------------------------ generator

def test_generator_quadratic_example():
    m = ou_model()
    phi = tf_r_norm_squared()
    x = np.array([0.7])
    got = apply_generator(m, ZERO, phi, x)
    assert got == pytest.approx(1.0 - 2.0 * 0.49, rel=1e-12)


def test_generator_matches_mehler_short_time():
    m = build_dirichlet_laplacian(2, beta=0.5)
    phi = tf_exp_quadratic(theta=np.array([0.5, -0.2]),
                           cquad=np.array([-0.3, -0.1]))
    x = np.array([0.4, -0.6])
    gen = apply_generator(m, ZERO, phi, x)
    dt = 1e-4
    diff = (mehler_oracle(m, dt, x, phi) - float(phi(m, x))) / dt
    assert abs(diff - gen) <= 1e-2 * (1.0 + abs(gen))


def test_generator_matches_forward_monte_carlo():
    m = build_dirichlet_laplacian(4)
    phi = tf_cylindrical_tanh(np.eye(4)[0])
    x = 0.4 * np.ones(4)
    gen = apply_generator(m, CUBIC, phi, x)
    dt, samples = 5e-3, 200000
    est = estimate_semigroup(m, CUBIC, t=dt, x=x, phi=phi, samples=samples,
                             seed=15, dt=dt)
    diff = (est.value - float(phi(m, x))) / dt
    assert abs(diff - gen) <= 3.0 * est.stderr / dt + 0.1


def test_tanh_hessian_trace_matches_finite_differences():
    m = build_dirichlet_laplacian(3, beta=0.5)
    phi = tf_cylindrical_tanh(np.vstack([0.8 * np.eye(3)[0], np.eye(3)[2]]))
    x = np.array([0.3, -0.2, 0.5])
    h = 1e-4
    fd = 0.0
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        second = (float(phi(m, x + e)) - 2 * float(phi(m, x)) + float(phi(m, x - e))) / h ** 2
        fd += m.r[k] ** 2 * second
    assert phi.hessian_r_trace(m, x) == pytest.approx(fd, abs=1e-5)


def test_dirichlet_form_identity_under_invariant_measure():
    m = build_dirichlet_laplacian(2, beta=0.5)
    ens = gaussian_invariant_sample(m, count=4000, seed=16)
    psi = tf_cylindrical_tanh(0.8 * np.eye(2)[0])
    pts = ens.points
    lhs = psi(m, pts) * apply_generator(m, ZERO, psi, pts)
    grads = psi.gradient(m, pts)
    rhs = 0.5 * np.sum(m.r ** 2 * grads ** 2, axis=-1)
    paired = lhs + rhs
    se = paired.std(ddof=1) / math.sqrt(ens.count)
    assert abs(paired.mean()) <= 3.0 * se


# ------------------------------------------------------------------ invariants

def test_contractivity_and_positivity():
    m = build_dirichlet_laplacian(3)
    x = 0.5 * np.ones(3)
    for phi in (tf_cylindrical_tanh(np.eye(3)[0]), tf_r_norm_squared(cap=4.0)):
        est = estimate_semigroup(m, CUBIC, t=0.5, x=x, phi=phi, samples=3000,
                                 seed=17, dt=0.01)
        assert abs(est.value) <= phi.sup_bound + 3.0 * est.stderr
    est = estimate_semigroup(m, CUBIC, t=0.5, x=x, phi=tf_r_norm_squared(cap=4.0),
                             samples=3000, seed=18, dt=0.01)
    assert est.value >= -3.0 * est.stderr


def test_semigroup_law_with_exact_inner_step():
    m = build_dirichlet_laplacian(2, beta=0.5)
    phi = tf_exp_quadratic(theta=np.array([0.4, 0.2]),
                           cquad=np.array([-0.3, -0.2]))
    x = np.array([0.5, -0.3])
    t, s = 0.4, 0.3
    whole = estimate_semigroup(m, ZERO, t=t + s, x=x, phi=phi, samples=10000,
                               seed=19, dt=0.02)
    cfg = IntegratorConfig(dt=0.02, horizon=t, seed=20)
    mid = integrate_ensemble(m, ZERO, cfg, x, 1000)
    vals = np.array([mehler_oracle(m, s, row, phi) for row in mid.states])
    nested = float(vals.mean())
    nested_se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    joint = math.sqrt(whole.stderr ** 2 + nested_se ** 2)
    assert abs(whole.value - nested) <= 3.0 * joint


def test_invariance_battery_both_provenances():
    m = build_dirichlet_laplacian(2, beta=0.5)
    battery = invariance_battery(m)
    ensembles = [gaussian_invariant_sample(m, count=4000, seed=21),
                 sample_invariant(m, ZERO, count=3000, seed=25)]
    cfg = IntegratorConfig(dt=0.02, horizon=0.3, seed=23)
    for ens in ensembles:
        moved = integrate_ensemble(m, ZERO, cfg, ens.points, ens.count)
        for phi in battery:
            before = phi(m, ens.points)
            after = phi(m, moved.states)
            jse = math.sqrt(before.var(ddof=1) / len(before)
                            + after.var(ddof=1) / len(after))
            assert abs(float(after.mean() - before.mean())) <= 4.0 * jse


def test_energy_identity_zero_drift():
    m = build_dirichlet_laplacian(2, beta=0.5)
    ens = gaussian_invariant_sample(m, count=5000, seed=24)
    phi = tf_exp_quadratic(theta=np.array([0.5, -0.3]),
                           cquad=np.array([-0.4, -0.2]))
    t = 0.5
    sgrid = np.linspace(0.0, t, 17)
    pts = ens.points
    dissipated = np.zeros(len(pts))
    curves = []
    for s in sgrid:
        ps = mehler_pushforward(m, float(s), phi)
        grads = ps.gradient(m, pts)
        curves.append(np.sum(m.r ** 2 * grads ** 2, axis=-1))
    curves = np.array(curves)
    dissipated = np.trapezoid(curves, sgrid, axis=0)
    end = mehler_pushforward(m, t, phi)(m, pts) ** 2
    start = phi(m, pts) ** 2
    g = end + dissipated - start
    se = g.std(ddof=1) / math.sqrt(len(g))
    assert abs(float(g.mean())) <= 5.0 * se


def test_measure_csv_round_trip(tmp_path):
    ens = gaussian_invariant_sample(build_dirichlet_laplacian(2), count=10, seed=3)
    path = tmp_path / "measure.csv"
    write_measure_csv(path, ens)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "index,coeff_1,coeff_2"
    assert len(rows) == 11
    back = np.array([[float(v) for v in r.split(",")[1:]] for r in rows[1:]])
    assert np.array_equal(back, ens.points)


def test_estimate_record_fields():
    m = ou_model()
    est = estimate_semigroup(m, ZERO, t=0.2, x=np.array([0.1]),
                             phi=tf_constant(1.0), samples=50, seed=42)
    rec = est.to_record("demo", x_id="x3")
    assert rec == {"check": "demo", "t": 0.2, "x_id": "x3", "value": 1.0,
                   "stderr": 0.0, "samples": 50, "seed": 42}
