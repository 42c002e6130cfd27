import math

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from floquetms.bench import (clustered_system, coupled_rhs, coupled_stuart_landau,
                             find_antiphase_orbit, fit_slope, rotating_frame, run_convergence,
                             spurious_slope, stuart_landau, stuart_landau_exact,
                             toy_grid, toy_matrix)
from floquetms.errors import InvalidArgument, OrbitNotFound
from floquetms.floquet import solve
from floquetms.grid import build_uniform
from floquetms.multistep import scheme
from floquetms.spurious import scalar_roots

A = B = 0.1


def test_toy_samples_at_zero_and_quarter_period():
    ex = stuart_landau_exact(A, B)
    assert np.allclose(ex.G(0.0), [[A, 1.0], [-1.0, B - 2.0]], atol=1e-15)
    assert np.allclose(ex.G(math.pi / 2), [[B - 2.0, 1.0], [-1.0, A]], atol=1e-15)
    for t in np.linspace(0, 2 * math.pi, 13):
        assert np.allclose(ex.G(t), toy_matrix(A, B, t), atol=1e-14)


def test_toy_exact_multipliers_and_vectors():
    ex = stuart_landau_exact(A, B)
    assert ex.multipliers[0].to_complex() == pytest.approx(math.exp(0.2 * math.pi), rel=1e-13)
    assert ex.multipliers[1].to_complex() == pytest.approx(math.exp(-3.8 * math.pi), rel=1e-12)
    t = 0.7
    U = np.array([[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]])
    for j in range(2):
        v = ex.eigenvector(j, t)
        assert abs(abs(np.vdot(v, U[:, j])) - np.linalg.norm(v)) <= 1e-12


def test_toy_rotation_satisfies_floquet_ode():
    ex = stuart_landau_exact(A, B)
    h = 1e-6
    for t in (0.0, 0.9, 2.5, 5.0):
        dU = (ex.rotation(t + h) - ex.rotation(t - h)) / (2 * h)
        U = ex.rotation(t)
        assert np.abs(dU - (ex.G(t) @ U - U @ ex.M)).max() <= 1e-4


def test_sample_rejects_wrong_period():
    with pytest.raises(InvalidArgument):
        stuart_landau(A, B, build_uniform(8, 1.0))


def test_rotating_frame_checks():
    with pytest.raises(InvalidArgument):
        rotating_frame(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(2))
    with pytest.raises(InvalidArgument):
        rotating_frame(np.array([[0.0, 0.5], [-0.5, 0.0]]), np.eye(2))


def test_clustered_system_has_prescribed_multipliers():
    ex = clustered_system()
    mags = sorted((abs(v.to_complex()) for v in ex.multipliers), reverse=True)
    assert np.allclose(mags, [1 + 5e-5, 1.0, 1 - 5e-5, 0.98, 0.5], rtol=1e-12)
    # the closed-form monodromy agrees with direct integration
    sol = solve_ivp(lambda t, x: (ex.G(t) @ x.reshape(5, 5)).ravel(), (0, 2 * math.pi),
                    np.eye(5).ravel(), method="DOP853", rtol=1e-12, atol=1e-12)
    Phi = sol.y[:, -1].reshape(5, 5)
    assert np.allclose(Phi, ex.rotation(2 * math.pi) @ sla.expm(2 * math.pi * ex.M), atol=1e-8)


def test_fit_slope_drops_coarse_outlier():
    h = np.array([1.0, 0.5, 0.25, 0.125, 0.0625])
    e = 3 * h ** 2
    e[0] = 0.5
    assert fit_slope(h, e) == pytest.approx(2.0, abs=1e-12)
    assert math.isnan(fit_slope([1.0], [1.0]))


def test_convergence_study_orders_and_monotonic_error():
    ex = stuart_landau_exact(A, B)
    study = run_convergence(ex, ["be", "gear2", "gear3"], [64, 128, 256, 512, 1024])
    for name, order in (("be", 1), ("gear2", 2), ("gear3", 3)):
        assert abs(study.slopes[name]["e_val"] - order) <= 0.2, study.slopes
        assert abs(study.slopes[name]["e_vec"] - order) <= 0.2, study.slopes
        ev = [r.e_val for r in study.by_scheme(name)]
        assert all(b < a for a, b in zip(ev, ev[1:]))
    assert len(study.rows()) == 15


def test_gear2_spurious_slope_matches_prediction():
    ex = stuart_landau_exact(A, B)
    p_values = [64, 128, 256, 512]
    slopes, table = spurious_slope(ex, "gear2", p_values)
    assert all(len(row) == 2 for row in table)
    nu = scalar_roots(scheme("gear2"), toy_grid(64)).spurious_roots[0]
    # nu is the per-step root, so |lambda| ~ |nu|^p
    want = math.log10(abs(nu))
    for s in slopes:
        assert abs(s - want) <= 0.1 * abs(want)


def test_antiphase_orbit_record():
    orb = find_antiphase_orbit(0.5, 0.1)
    assert orb.residual <= 1e-10
    assert orb.closure <= 1e-10 * np.linalg.norm(orb.x0)
    traj = solve_ivp(coupled_rhs(0.5, 0.1), (0, orb.period), orb.x0, method="DOP853",
                     rtol=1e-13, atol=1e-13, dense_output=True)
    z = traj.sol(np.linspace(0, orb.period, 200))
    assert np.abs(z[:2] + z[2:]).max() <= 1e-8
    with pytest.raises(InvalidArgument):
        find_antiphase_orbit(0.5, 0.3)


def test_orbit_not_found_carries_history():
    with pytest.raises(OrbitNotFound) as info:
        find_antiphase_orbit(0.5, 0.1, max_newton=1, tol=1e-300)
    assert info.value.residuals


def test_coupled_oscillatory_multiplier_is_one():
    system, orb = coupled_stuart_landau(0.5, 0.1, p=512)
    sol = solve(system, "gear4")
    dist = min(abs(m.to_complex() - 1.0) for m in sol.multipliers)
    assert dist <= 1e-4
    assert all(np.isfinite(abs(m.to_complex())) for m in sol.multipliers)


def test_decoupled_limit_is_product_of_single_oscillators():
    # at delta = 0 both oscillators sit on the unit circle: r' = r(1 - r^2)
    # gives the radial multiplier exp(-2 T) and the phase multiplier 1
    system, orb = coupled_stuart_landau(0.5, 0.0, p=512)
    assert orb.period == pytest.approx(2 * math.pi / 0.5, rel=1e-9)
    sol = solve(system, "gear4")
    mags = sorted(abs(m.to_complex()) for m in sol.multipliers)
    want = sorted([1.0, 1.0, math.exp(-2 * orb.period), math.exp(-2 * orb.period)])
    assert mags[2:] == pytest.approx(want[2:], abs=1e-5)
    assert np.allclose(mags[:2], want[:2], rtol=1e-2)
