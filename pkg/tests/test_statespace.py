"""System containers, discretization, observability, and gain design."""

import math

import numpy as np
import pytest
import scipy.linalg

from statefusion import (
    GaussianEstimate,
    LinearMeasurementModel,
    LinearStateSpace,
    is_observable,
    kf_predict,
    model_library,
    observability_matrix,
    observer_gain,
    pole_placement_gain,
)
from statefusion.statespace import check_covariance, discretize


# ---------------------------------------------------------------- containers

def test_covariance_validation_rejects_asymmetry_and_indefiniteness():
    with pytest.raises(ValueError):
        check_covariance([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(ValueError):
        check_covariance([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues -1, 3
    with pytest.raises(ValueError):
        check_covariance([[np.inf, 0.0], [0.0, 1.0]])


def test_gaussian_estimate_dimension_check():
    with pytest.raises(ValueError):
        GaussianEstimate([0.0, 0.0], [[1.0]])
    est = GaussianEstimate([1.0, 2.0], np.eye(2))
    assert est.dim == 2


def test_state_space_shape_checks():
    with pytest.raises(ValueError):
        LinearStateSpace(A=[[0.0, 1.0]], B=[[1.0]], sigma_u=[[1.0]])
    with pytest.raises(ValueError):
        LinearStateSpace(A=np.eye(2), B=np.zeros((3, 1)), sigma_u=[[1.0]])
    with pytest.raises(ValueError):
        LinearStateSpace(A=np.eye(2), B=np.zeros((2, 1)), sigma_u=np.eye(2))
    with pytest.raises(ValueError):
        LinearStateSpace(A=[[np.nan, 0], [0, 1]], B=np.zeros((2, 1)), sigma_u=[[0.0]])


# -------------------------------------------------------------- discretize

def test_discretize_zero_dynamics_is_identity():
    model = LinearStateSpace(np.zeros((3, 3)), np.arange(6.0).reshape(3, 2), np.eye(2))
    a_star, b_star = discretize(model, dt=2.5)
    assert np.array_equal(a_star, np.eye(3))
    assert np.allclose(b_star, model.B * 2.5, rtol=0, atol=1e-15)


def test_discretize_integrator_chain_closed_forms():
    # Nilpotent A truncates the series exactly: double integrator and the
    # three-state chain have polynomial transition matrices.
    dt = 0.37
    cv = LinearStateSpace([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[1.0]])
    a_star, b_star = discretize(cv, dt)
    assert np.allclose(a_star, [[1.0, dt], [0.0, 1.0]], rtol=0, atol=1e-15)
    assert np.allclose(b_star, [[dt * dt / 2.0], [dt]], rtol=0, atol=1e-15)

    a3 = np.diag([1.0, 1.0], k=1)
    ca = LinearStateSpace(a3, [[0.0], [0.0], [1.0]], [[1.0]])
    a_star, _ = discretize(ca, dt)
    expected = [[1.0, dt, dt * dt / 2.0], [0.0, 1.0, dt], [0.0, 0.0, 1.0]]
    assert np.allclose(a_star, expected, rtol=0, atol=1e-14)


def test_discretize_scalar_against_series_oracle():
    # Independent oracle: 64-term factorial series summed directly.
    for a in (-2.0, 0.3, 1.7):
        model = LinearStateSpace([[a]], [[1.0]], [[1.0]])
        a_star, _ = discretize(model, dt=1.0)
        series = sum(a ** k / math.factorial(k) for k in range(64))
        assert abs(a_star[0, 0] - series) < 1e-12 * max(1.0, abs(series))


def test_discretize_matches_scipy_expm():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = rng.normal(size=(4, 4))
        model = LinearStateSpace(a, np.zeros((4, 1)), [[0.0]])
        for dt in (0.1, 1.0, 3.0):
            a_star, _ = discretize(model, dt)
            ref = scipy.linalg.expm(a * dt)
            assert np.abs(a_star - ref).max() < 1e-10 * max(1.0, np.abs(ref).max())


def test_discretize_semigroup_property():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.normal(size=(3, 3))
        model = LinearStateSpace(a, np.zeros((3, 1)), [[0.0]])
        dt1, dt2 = rng.uniform(0.05, 1.5, 2)
        a_sum, _ = discretize(model, dt1 + dt2)
        a_1, _ = discretize(model, dt1)
        a_2, _ = discretize(model, dt2)
        scale = max(1.0, np.abs(a_sum).max())
        assert np.abs(a_sum - a_1 @ a_2).max() < 1e-8 * scale


def test_discretize_rejects_bad_step():
    model = LinearStateSpace(np.eye(2), np.zeros((2, 1)), [[0.0]])
    with pytest.raises(ValueError):
        discretize(model, dt=0.0)
    with pytest.raises(ValueError):
        discretize(model, dt=-1.0)


# ------------------------------------------------------------ observability

def test_observability_matrix_lateral_vehicle_entries():
    model = model_library("lateral", {"v": 2.0, "L": 1.0, "tau_beta": 0.5})
    obs = observability_matrix(model.A, [[1.0, 0.0, 0.0]])
    # v=2, L=1: rows are the position read-out and its first two derivatives.
    assert np.array_equal(obs, [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 4.0]])
    assert is_observable(model.A, [[1.0, 0.0, 0.0]])


def test_observability_matrix_identity_and_scalar():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    obs = observability_matrix(a, np.eye(2))
    assert np.array_equal(obs[:2], np.eye(2))
    assert np.array_equal(obs[2:], a)
    assert np.array_equal(observability_matrix([[5.0]], [[2.0]]), [[2.0]])


def test_double_pendulum_cart_is_observable_from_angle_and_position():
    model = model_library("dip", {"m1": 1.0, "m2": 1.0, "L1": 1.0, "L2": 1.0, "g": 10.0})
    h = np.zeros((2, 6))
    h[0, 0] = 1.0  # first link angle
    h[1, 4] = 1.0  # cart position
    assert is_observable(model.A, h)


def test_pendulum_cart_position_alone_is_not_observable():
    model = model_library("sip", {"g": 10.0, "L": 1.0})
    h = np.array([[0.0, 0.0, 1.0, 0.0]])
    assert not is_observable(model.A, h)
    obs = observability_matrix(model.A, h)
    sv = np.linalg.svd(obs, compute_uv=False)
    assert np.count_nonzero(sv > 1e-8 * sv[0]) == 2


def test_identity_output_always_observable():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a = rng.normal(size=(4, 4))
        assert is_observable(a, np.eye(4))


def test_observability_controllability_duality():
    rng = np.random.default_rng(21)
    for _ in range(100):
        n = rng.integers(2, 5)
        p = rng.integers(1, n + 1)
        a = rng.normal(size=(n, n))
        h = rng.normal(size=(p, n))
        obs_rank = np.linalg.matrix_rank(observability_matrix(a, h))
        # Controllability matrix of the transposed pair, built directly.
        blocks = [h.T]
        for _ in range(n - 1):
            blocks.append(a.T @ blocks[-1])
        ctrb_rank = np.linalg.matrix_rank(np.hstack(blocks))
        assert obs_rank == ctrb_rank


# ------------------------------------------------------------ gain design

def test_pole_placement_scalar_closed_form():
    gain = pole_placement_gain([[3.0]], [2.0], [-1.0])
    assert np.allclose(gain, [(3.0 - (-1.0)) / 2.0], rtol=0, atol=1e-14)


def test_pole_placement_matches_eigenvalue_oracle():
    rng = np.random.default_rng(8)
    desired = np.array([-1.0, -2.0, -3.0])
    for _ in range(20):
        a = rng.normal(size=(3, 3))
        b = rng.normal(size=3)
        blocks = np.column_stack([b, a @ b, a @ a @ b])
        if np.linalg.matrix_rank(blocks) < 3:
            continue
        gain = pole_placement_gain(a, b, desired)
        achieved = np.sort(np.linalg.eigvals(a - np.outer(b, gain)).real)
        assert np.abs(achieved - desired[::-1]).max() < 1e-6


def test_pole_placement_repeated_poles_by_characteristic_polynomial():
    # A defective closed loop splits its eigenvalues under any solver, so the
    # repeated-pole case is checked through the polynomial coefficients.
    sip = model_library("sip", {"g": 10.0, "L": 1.0})
    gain = pole_placement_gain(sip.A, sip.B[:, 0], [-4.0] * 4)
    coeffs = np.poly(sip.A - np.outer(sip.B[:, 0], gain))
    assert np.abs(coeffs - [1.0, 16.0, 96.0, 256.0, 256.0]).max() < 1e-9


def test_pendulum_controller_gain_printed_values():
    sip = model_library("sip", {"g": 10.0, "L": 1.0})
    gain = pole_placement_gain(sip.A, sip.B[:, 0], [-4.0] * 4)
    assert np.array_equal(gain, [-131.6, -41.6, -25.6, -25.6])


def test_pole_placement_rejects_uncontrollable_pair():
    a = np.diag([1.0, 2.0])
    with pytest.raises(ValueError):
        pole_placement_gain(a, [1.0, 0.0], [-1.0, -2.0])


def test_pole_placement_rejects_unpaired_complex_eigs():
    with pytest.raises(ValueError):
        pole_placement_gain(np.eye(2), [1.0, 1.0], [-1.0 + 1.0j, -2.0])


def test_observer_gain_single_output_duality():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(3, 3))
    h = np.array([[1.0, 0.0, 0.0]])
    desired = [-1.0, -2.0, -3.0]
    L = observer_gain(a, h, desired)
    assert L.shape == (3, 1)
    dual = pole_placement_gain(a.T, h[0], desired)
    assert np.array_equal(L[:, 0], dual)
    achieved = np.sort(np.linalg.eigvals(a - L @ h).real)
    assert np.abs(achieved - np.sort(desired)).max() < 1e-6


def test_observer_gain_angle_block_hand_values():
    # 2-state block: char(A - L H) = s^2 + l1 s + (l2 - 10) = (s + 4)^2.
    a1 = np.array([[0.0, 1.0], [10.0, 0.0]])
    L = observer_gain(a1, [[1.0, 0.0]], [-4.0, -4.0])
    assert np.allclose(L[:, 0], [8.0, 26.0], rtol=0, atol=1e-9)


def test_observer_gain_pendulum_block_design():
    sip = model_library("sip", {"g": 10.0, "L": 1.0})
    h = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
    L = observer_gain(sip.A, h, [-4.0] * 4, decoupling=[[0, 1], [2, 3]])
    assert np.array_equal(L, [[8.0, 0.0], [26.0, 0.0], [0.0, 8.0], [0.0, 16.0]])


def test_observer_gain_partition_validation():
    sip = model_library("sip", {"g": 10.0, "L": 1.0})
    h = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
    with pytest.raises(ValueError):
        observer_gain(sip.A, h, [-4.0] * 4)  # partition required for p > 1
    with pytest.raises(ValueError):
        observer_gain(sip.A, h, [-4.0] * 4, decoupling=[[0, 1], [2]])
    with pytest.raises(ValueError):
        observer_gain(sip.A, h, [-4.0] * 4, decoupling=[[0, 2], [1, 3]])
    h_zero = np.array([[1.0, 0, 0, 0], [0.0, 0, 0, 0]])  # second block unread
    with pytest.raises(ValueError):
        observer_gain(sip.A, h_zero, [-4.0] * 4, decoupling=[[0, 1], [2, 3]])


# ------------------------------------------------------------ model library

def test_model_library_kinematic_matrices():
    dt = 0.7
    ca = model_library("ca", {"dt": dt, "var_a": 1.0})
    assert np.array_equal(ca.A, [[1.0, dt, dt * dt / 2.0], [0.0, 1.0, dt], [0.0, 0.0, 1.0]])
    cv = model_library("cv", {"dt": dt, "var_v": 1.0})
    assert np.array_equal(cv.A, [[1.0, dt], [0.0, 1.0]])
    cp = model_library("cp", {"var_p": 1.0})
    assert np.array_equal(cp.A, [[1.0]])


def test_unified_model_with_zeroed_channels_equals_ca():
    dt = 0.5
    unified = model_library("unified", {"dt": dt, "var_p": 0.0, "var_v": 0.0, "var_a": 0.3})
    ca = model_library("ca", {"dt": dt, "var_a": 0.3})
    est = GaussianEstimate([1.0, -1.0, 0.5], np.diag([1.0, 2.0, 3.0]))
    out_u = kf_predict(est, unified)
    out_c = kf_predict(est, ca)
    assert np.array_equal(out_u.mean, out_c.mean)
    assert np.allclose(out_u.cov, out_c.cov, rtol=0, atol=1e-15)


def test_cv_one_step_propagation_is_linear_in_velocity():
    dt = 0.25
    cv = model_library("cv", {"dt": dt, "var_v": 0.0})
    est = GaussianEstimate([2.0, 3.0], np.eye(2))
    out = kf_predict(est, cv)
    assert np.allclose(out.mean, [2.0 + 3.0 * dt, 3.0], rtol=0, atol=1e-15)


def test_landmark_range_three_four_five():
    meas = model_library("landmark_range", {"x_l": 0.0, "y_l": 0.0, "var_r": 0.01})
    state = np.array([3.0, 4.0, 0.3])
    assert np.allclose(meas.h(state), [5.0], rtol=0, atol=1e-15)
    assert np.allclose(meas.jac(state), [[0.6, 0.8, 0.0]], rtol=0, atol=1e-15)


def test_landmark_range_jacobian_undefined_at_landmark():
    meas = model_library("landmark_range", {"x_l": 1.0, "y_l": 2.0, "var_r": 0.01})
    with pytest.raises(ValueError):
        meas.jac(np.array([1.0, 2.0, 0.0]))


def _central_difference_jacobian(f, x, i_max=None):
    x = np.asarray(x, dtype=float)
    out = []
    for i in range(x.size if i_max is None else i_max):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        out.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * h))
    return np.array(out).T


def test_bicycle_jacobians_match_finite_differences():
    model = model_library("bicycle", {"dt": 0.1, "L": 2.0, "tau_beta": 0.4})
    rng = np.random.default_rng(17)
    for _ in range(20):
        x = rng.normal(size=4) * [2.0, 2.0, 1.0, 0.3]
        u = rng.normal(size=2) * [1.0, 0.2] + [1.5, 0.0]
        jx_num = _central_difference_jacobian(lambda xv: model.g(xv, u), x)
        ju_num = _central_difference_jacobian(lambda uv: model.g(x, uv), u)
        scale = max(1.0, np.abs(jx_num).max())
        assert np.abs(model.jac_x(x, u) - jx_num).max() < 1e-4 * scale
        assert np.abs(model.jac_u(x, u) - ju_num).max() < 1e-4 * max(1.0, np.abs(ju_num).max())


def test_reduced_bicycle_jacobians_match_finite_differences():
    model = model_library("reduced_bicycle", {"dt": 0.1, "L": 1.0})
    rng = np.random.default_rng(19)
    for _ in range(20):
        x = rng.normal(size=3)
        u = np.array([1.0 + 0.3 * rng.normal(), 0.2 * rng.normal()])
        jx_num = _central_difference_jacobian(lambda xv: model.g(xv, u), x)
        ju_num = _central_difference_jacobian(lambda uv: model.g(x, uv), u)
        assert np.abs(model.jac_x(x, u) - jx_num).max() < 1e-4 * max(1.0, np.abs(jx_num).max())
        assert np.abs(model.jac_u(x, u) - ju_num).max() < 1e-4 * max(1.0, np.abs(ju_num).max())


def test_model_library_rejects_unknown_and_incomplete():
    with pytest.raises(ValueError):
        model_library("hovercraft", {})
    with pytest.raises(ValueError):
        model_library("cv", {"dt": 0.1})  # var_v missing
