import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from floquetms.bench import clustered_system, stuart_landau, toy_grid
from floquetms.errors import InvalidArgument
from floquetms.escale import ExponentScaledValue
from floquetms.floquet import (eig_error, eigenvector_at_slice, gap_report, solve,
                               subspace_angle, vec_error, write_eigen_csv)
from floquetms.grid import build_uniform
from floquetms.lptv import SampledLptvSystem, assemble
from floquetms.multistep import scheme

EXACT_TOY = math.exp(0.2 * math.pi)


def test_eig_error_examples():
    assert eig_error(EXACT_TOY, EXACT_TOY) == 0.0
    assert eig_error(1.01 * EXACT_TOY, EXACT_TOY) == pytest.approx(0.01, rel=1e-12)
    big = ExponentScaledValue(1.0 + 0j, 4000)
    assert eig_error(ExponentScaledValue(1.5 + 0j, 4000), big) == pytest.approx(0.5)
    with pytest.raises(InvalidArgument):
        eig_error(1.0, 0.0)


def test_vec_error_aligns_phase_and_scale():
    x = np.array([1.0, 2.0j, -0.5])
    assert vec_error((3 - 4j) * x, x) <= 1e-15
    y = x + np.array([0.0, 0.0, 1e-3])
    assert vec_error(y, x) == pytest.approx(
        np.linalg.norm(y * (np.vdot(y, x) / np.vdot(y, y)) - x) / np.linalg.norm(x))
    assert vec_error(np.zeros(3), x) == 1.0
    with pytest.raises(InvalidArgument):
        vec_error(x, np.zeros(3))


def test_subspace_angle_examples():
    e1, e2 = np.eye(3)[:, :1], np.eye(3)[:, 1:2]
    assert subspace_angle(e1, e1) == 0.0
    assert subspace_angle(e1, e2) == pytest.approx(math.pi / 2, abs=1e-15)
    phi = 0.3
    v = np.array([[math.cos(phi)], [math.sin(phi)], [0.0]])
    assert subspace_angle(e1, v) == pytest.approx(phi, abs=1e-14)
    assert subspace_angle(np.eye(3)[:, :2], np.eye(3)[:, [1, 0]]) <= 1e-15


def test_subspace_angle_rejects_rank_deficient():
    with pytest.raises(InvalidArgument):
        subspace_angle(np.ones((3, 2)), np.eye(3)[:, :2])
    with pytest.raises(InvalidArgument):
        subspace_angle(np.eye(3)[:, :1], np.eye(4)[:, :1])


def complex_bases(n, k):
    entries = st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False)
    return st.lists(entries, min_size=n * k, max_size=n * k).map(
        lambda xs: np.array(xs).reshape(n, k) + np.eye(n, k))


@given(U=complex_bases(5, 2), V=complex_bases(5, 2),
       c=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False,
                            allow_infinity=False))
def test_subspace_angle_symmetric_and_scale_invariant(U, V, c):
    try:
        a = subspace_angle(U, V)
    except InvalidArgument:
        return
    assert 0.0 <= a <= math.pi / 2
    assert abs(subspace_angle(V, U) - a) <= 1e-12
    assert abs(subspace_angle(c * U, V) - a) <= 1e-12
    assert subspace_angle(U, U @ np.array([[1, 2], [0, 1]])) <= 1e-12


@given(x=st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
                  min_size=4, max_size=4),
       c=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False,
                            allow_infinity=False))
def test_vec_error_scale_invariant(x, c):
    xe = np.array([1.0, -1.0, 0.5j, 2.0])
    xc = np.array(x)
    if np.linalg.norm(xc) < 1e-3:
        return
    assert abs(vec_error(c * xc, xe) - vec_error(xc, xe)) <= 1e-12


def test_gap_report_examples():
    g = gap_report([1.0, 0.1], 1)
    assert g.gap == pytest.approx(0.1) and not g.ill_separated
    assert g.advisory == "well separated"
    g = gap_report([1.0, 0.9999], 1)
    assert g.ill_separated
    assert "subspace angle" in g.advisory
    with pytest.raises(InvalidArgument):
        gap_report([1.0], 1)


def test_gap_report_thirteen_cluster():
    cluster = [1.0 + 1e-5 * (j - 6) for j in range(13)]
    exact = clustered_system(cluster=cluster, rest=(0.5, 0.4, 0.3))
    mults = exact.multipliers
    assert gap_report(mults, 1).ill_separated
    assert not gap_report(mults, 13).ill_separated
    assert gap_report(mults, 13).gap == pytest.approx(0.5 / (1 - 6e-5), rel=1e-9)


def test_toy_model_slice_vectors_follow_rotation():
    system, exact = stuart_landau(0.1, 0.1, toy_grid(512))
    sol = solve(system, "gear2")
    assert eig_error(sol.multipliers[0], exact.multipliers[0]) <= 1e-3
    grid = system.grid
    worst = 0.0
    for i in (0, 37, 100, 255, 511):
        v = eigenvector_at_slice(sol, 0, i)
        worst = max(worst, vec_error(v, exact.eigenvector(0, grid.time(i))))
    assert worst <= 1e-3
    assert np.array_equal(eigenvector_at_slice(sol, 0, 0), sol.eigenvectors[0][0])
    with pytest.raises(InvalidArgument):
        eigenvector_at_slice(sol, 0, grid.p)


def test_zero_system_vectors_are_constant():
    g = build_uniform(8, 1.0)
    sol = solve(SampledLptvSystem(g, [np.zeros((2, 2))] * 8), "gear3", k=1)
    v0 = sol.eigenvectors[0][0]
    for i in range(8):
        assert vec_error(sol.eigenvectors[0][i], v0) <= 1e-12


@pytest.mark.parametrize("solver", ["dense", "ptoar"])
def test_reported_residual_bounds_reconstruction(solver, rng):
    g = build_uniform(6, 1.0)
    system = SampledLptvSystem(g, [rng.standard_normal((4, 4)) - np.eye(4) for _ in range(6)])
    sol = solve(system, "gear2", solver=solver, k=2)
    op = assemble(system, scheme("gear2"))
    for lam, x, res in zip(sol.multipliers, sol.stacked, sol.residuals):
        y = x.astype(complex)
        for s in range(1, 7):
            y = op.apply(s, y)
        lhs = np.linalg.norm(y - lam.to_complex() * x)
        assert lhs <= max(res, 1e-13) * abs(lam) * np.linalg.norm(x) * (1 + 1e-6)


def test_unknown_solver_and_bad_k():
    system, _ = stuart_landau(0.1, 0.1, toy_grid(8))
    with pytest.raises(InvalidArgument):
        solve(system, "gear2", solver="magic")
    with pytest.raises(InvalidArgument):
        solve(system, "gear2", k=5)


def test_eigen_csv_is_deterministic(tmp_path):
    system, _ = stuart_landau(0.1, 0.1, toy_grid(64))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_eigen_csv(a, solve(system, "gear2"))
    write_eigen_csv(b, solve(system, "gear2"))
    assert a.read_bytes() == b.read_bytes()
    head = a.read_text().splitlines()[0]
    assert head.startswith("index,re_mantissa,im_mantissa,exponent2,abs")


def test_exact_toy_multipliers():
    _, exact = stuart_landau(0.1, 0.1, toy_grid(4))
    assert cmath.isclose(exact.multipliers[0].to_complex(), EXACT_TOY, rel_tol=1e-13)
    assert cmath.isclose(exact.multipliers[1].to_complex(), math.exp(-1.9 * 2 * math.pi),
                         rel_tol=1e-12)
