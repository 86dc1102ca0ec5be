import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simlab.spectral_core import (
    SpectralModel,
    build_dirichlet_laplacian,
    build_periodic_laplacian,
    e_norm,
    grid_transform,
    h_norm,
    inverse_grid_transform,
    operator_norm_R,
    ou_model,
    r_inner,
    r_norm,
    semigroup_flow,
    verify_smoothing,
)


def basis_vector(n, k):
    e = np.zeros(n)
    e[k - 1] = 1.0
    return e


# ---------------------------------------------------------------- constructors

def test_dirichlet_first_eigenvalue():
    m = build_dirichlet_laplacian(1, beta=0.0)
    assert m.lambdas[0] == pytest.approx(-np.pi ** 2, rel=0, abs=0)
    assert m.r[0] == 1.0
    assert m.zeta_A == -np.pi ** 2


def test_dirichlet_r_scaling_beta_half():
    m = build_dirichlet_laplacian(3, beta=0.5)
    # r_k = (k pi)^(-2 beta); k = 2
    assert m.r[1] == pytest.approx(1.0 / (2.0 * np.pi), rel=1e-14)


def test_periodic_eigenvalues():
    m = build_periodic_laplacian(3)
    assert np.allclose(m.lambdas, -((2 * np.pi * np.arange(1, 4)) ** 2))


def test_invariant_rejects_positive_eigenvalue():
    with pytest.raises(ValueError):
        SpectralModel(n=1, lambdas=np.array([0.5]), r=np.array([1.0]), zeta_A=-1.0)


def test_invariant_rejects_increasing_eigenvalues():
    with pytest.raises(ValueError):
        SpectralModel(n=2, lambdas=np.array([-4.0, -1.0]), r=np.ones(2), zeta_A=-1.0)


def test_invariant_rejects_inconsistent_r():
    with pytest.raises(ValueError):
        SpectralModel(n=1, lambdas=np.array([-4.0]), r=np.array([1.0]),
                      zeta_A=-4.0, beta=0.5)


# ----------------------------------------------------------------------- flow

def test_flow_identity_at_zero():
    m = build_dirichlet_laplacian(4)
    x = np.array([1.0, -2.0, 0.5, 3.0])
    assert np.array_equal(semigroup_flow(m, 0.0, x), x)


def test_flow_scalar_exponential():
    m = build_dirichlet_laplacian(1)
    out = semigroup_flow(m, 1.0 / np.pi ** 2, basis_vector(1, 1))
    assert out[0] == pytest.approx(np.exp(-1.0), rel=1e-15)


def test_flow_respects_fitted_smoothing_bound():
    m = build_dirichlet_laplacian(8, beta=0.5)
    fit = m.smoothing
    rng = np.random.default_rng(7)
    t = 0.01
    for _ in range(20):
        x = rng.standard_normal(8)
        lhs = r_norm(m, semigroup_flow(m, t, x))
        rhs = fit.M * np.exp(-fit.w * t) * t ** (-fit.gamma) * h_norm(x)
        assert lhs <= rhs * (1 + 1e-12)


@settings(max_examples=50, deadline=None)
@given(
    t=st.floats(0.0, 5.0),
    s=st.floats(0.0, 5.0),
    seed=st.integers(0, 2 ** 31),
)
def test_flow_is_a_semigroup(t, s, seed):
    m = build_dirichlet_laplacian(6, beta=0.25)
    x = np.random.default_rng(seed).standard_normal(6)
    once = semigroup_flow(m, t + s, x)
    twice = semigroup_flow(m, t, semigroup_flow(m, s, x))
    assert np.allclose(once, twice, rtol=1e-12, atol=1e-300)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_dissipativity_of_A(seed):
    m = build_dirichlet_laplacian(5)
    x = np.random.default_rng(seed).standard_normal(5)
    assert np.dot(m.lambdas * x, x) <= m.zeta_A * np.dot(x, x) + 1e-12


# ---------------------------------------------------------------------- norms

def test_r_norm_equals_h_norm_at_beta_zero():
    m = build_dirichlet_laplacian(4, beta=0.0)
    x = np.array([1.0, 2.0, -1.0, 0.5])
    assert r_norm(m, x) == pytest.approx(h_norm(x), rel=1e-15)


def test_r_norm_weights_by_inverse_r():
    # lambdas (-1, -4) with beta = 1/2 give r = (1, 1/2)
    m = SpectralModel(n=2, lambdas=np.array([-1.0, -4.0]),
                      r=np.array([1.0, 0.5]), zeta_A=-1.0, beta=0.5)
    assert r_norm(m, np.array([0.0, 1.0])) == pytest.approx(2.0, rel=1e-15)


def test_h_bounded_by_operator_norm_times_r_norm():
    m = build_dirichlet_laplacian(16, beta=0.5)
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = rng.standard_normal(16)
        assert h_norm(x) <= operator_norm_R(m) * r_norm(m, x) * (1 + 1e-12)
    # ||R|| is r_1 for a decreasing profile
    assert operator_norm_R(m) == m.r[0]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_r_inner_consistent_with_r_norm(seed):
    m = build_dirichlet_laplacian(6, beta=0.3)
    x = np.random.default_rng(seed).standard_normal(6)
    assert r_inner(m, x, x) == pytest.approx(r_norm(m, x) ** 2, rel=1e-12, abs=1e-12)


# ------------------------------------------------------------------ transforms

def test_grid_values_of_first_mode():
    m = build_dirichlet_laplacian(3)
    vals = grid_transform(m, basis_vector(3, 1))
    expect = np.sqrt(2.0) * np.sin(np.pi * m.grid)
    assert np.allclose(vals, expect, rtol=1e-14)


def test_round_trip_exact():
    for basis in ("dirichlet", "periodic"):
        builder = build_dirichlet_laplacian if basis == "dirichlet" else build_periodic_laplacian
        m = builder(9, beta=0.25)
        rng = np.random.default_rng(11)
        x = rng.standard_normal(9)
        back = inverse_grid_transform(m, grid_transform(m, x))
        assert np.max(np.abs(back - x)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31), factor=st.integers(1, 4))
def test_round_trip_exact_any_grid_factor(seed, factor):
    m = build_dirichlet_laplacian(5, grid_factor=factor)
    x = np.random.default_rng(seed).standard_normal(5)
    back = inverse_grid_transform(m, grid_transform(m, x))
    assert np.max(np.abs(back - x)) <= 1e-12


def test_e_norm_matches_direct_evaluation():
    m = build_dirichlet_laplacian(2)
    x = np.array([1.0, 1.0])
    direct = np.max(np.abs(np.sqrt(2) * np.sin(np.pi * m.grid)
                           + np.sqrt(2) * np.sin(2 * np.pi * m.grid)))
    assert e_norm(m, x) == pytest.approx(direct, rel=1e-14)
    # refining the grid can only increase the sup, and not by much here
    fine = e_norm(m.with_grid_factor(64), x)
    assert direct <= fine <= direct * 1.05


def test_grid_transform_batch_shape():
    m = build_dirichlet_laplacian(3)
    xs = np.random.default_rng(0).standard_normal((7, 3))
    vals = grid_transform(m, xs)
    assert vals.shape == (7, m.grid_size)
    assert np.allclose(inverse_grid_transform(m, vals), xs, atol=1e-12)


# ------------------------------------------------------------------- smoothing

def test_smoothing_contraction_branch():
    m = build_dirichlet_laplacian(4, beta=0.0)
    fit = m.smoothing
    assert (fit.M, fit.w, fit.gamma) == (1.0, np.pi ** 2, 0.0)
    assert fit.ok
    assert np.all(fit.margin >= -1e-14)


def test_smoothing_beta_half_fit():
    # analytic envelope: sup_lambda lambda^(1/2) e^(-lambda t) = (1/(2e))^(1/2) t^(-1/2)
    m = build_dirichlet_laplacian(64, beta=0.5)
    fit = m.smoothing
    assert fit.ok
    assert abs(fit.gamma - 0.5) <= 0.05
    assert fit.M == pytest.approx(np.sqrt(1.0 / (2.0 * np.e)), rel=0.05)
    # certified with positive margin at the top of the t-grid
    assert fit.margin[-1] > 0.0


def test_smoothing_bound_holds_for_all_basis_vectors():
    m = build_dirichlet_laplacian(16, beta=0.5)
    fit = m.smoothing
    for t in (1e-3, 0.1, 10.0):
        rhs = fit.M * np.exp(-fit.w * t) * t ** (-fit.gamma)
        for k in range(1, 17):
            lhs = r_norm(m, semigroup_flow(m, t, basis_vector(16, k)))
            assert lhs <= rhs * (1 + 1e-9)


def test_smoothing_gamma_never_exceeds_beta():
    for beta in (0.25, 0.5, 0.75):
        fit = build_dirichlet_laplacian(32, beta=beta).smoothing
        assert fit.gamma <= beta + 1e-12
        assert fit.ok


def test_ou_model_is_unit_scale():
    m = ou_model()
    assert m.n == 1
    assert m.lambdas[0] == -1.0
    assert m.r[0] == 1.0
    assert m.smoothing.ok
