import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from floquetms.bench import stuart_landau, toy_grid
from floquetms.errors import InvalidArgument, IterationLimit
from floquetms.floquet import match_eigenvalues
from floquetms.grid import build_uniform
from floquetms.lptv import SampledLptvSystem, assemble, companion_sequence
from floquetms.multistep import MultistepScheme, scheme
from floquetms.pschur import periodic_eigenvector, periodic_schur, sort_leading
from floquetms.ptoar import (arnoldi_residuals, expand, extract_ritz, init,
                             orthonormality_defects, restart, solve_dominant)


def sparse_op(seed, n, p, d, density=None, shift=1.0):
    rng = np.random.default_rng(seed)
    density = min(1.0, 4.0 / n) if density is None else density
    g = build_uniform(p, 1.0)
    mats = [(sp.random(n, n, density=density, random_state=int(rng.integers(2 ** 31)))
             - shift * sp.identity(n)).tocsc() for _ in range(p)]
    return assemble(SampledLptvSystem(g, mats), MultistepScheme(d))


def dense_eigs(op):
    return periodic_schur(companion_sequence(op)).eigenvalues


def check_state(st):
    assert arnoldi_residuals(st).max() <= 1e-10
    qd, ud = orthonormality_defects(st)
    assert qd <= 1e-13
    assert ud <= 1e-12


def test_init_invariants():
    op = sparse_op(0, 8, 4, 2)
    st = init(op)
    assert st.k == 1
    check_state(st)


def test_init_rejects_zero_start():
    op = sparse_op(0, 8, 4, 2)
    with pytest.raises(InvalidArgument):
        init(op, start=np.zeros(op.size))
    with pytest.raises(InvalidArgument):
        init(op, start=np.ones(3))


def test_init_deterministic():
    op = sparse_op(1, 6, 5, 3)
    a, b = init(op, seed=4), init(op, seed=4)
    for s in range(op.p):
        assert np.array_equal(a.T[s], b.T[s])


def test_exact_eigenvector_start():
    op = sparse_op(2, 5, 6, 2)
    form = sort_leading(periodic_schur(companion_sequence(op)))
    x0 = periodic_eigenvector(form, 0)[0]
    st = init(op, start=x0)
    (pair,) = extract_ritz(st, 1)
    assert pair.value.rel_diff(form.eigenvalues[0]) <= 1e-10
    assert pair.residual <= 1e-10


def test_zero_system_breaks_down_immediately():
    g = build_uniform(6, 1.0)
    op = assemble(SampledLptvSystem(g, [np.zeros((4, 4))] * 6), scheme("be"))
    st = init(op)
    assert abs(st.T[-1][1, 0]) == 0.0
    (pair,) = extract_ritz(st, 1)
    assert pair.value.to_complex() == 1.0
    assert pair.residual == 0.0
    out = solve_dominant(op, 1)
    assert out.pairs[0].value.to_complex() == 1.0
    assert out.pairs[0].residual == 0.0


def test_relation_after_twenty_expansions():
    op = sparse_op(3, 100, 16, 2)
    st = init(op)
    while st.k < 20:
        expand(st)
    check_state(st)


def test_storage_bound_after_expansions():
    n, p, d = 200, 8, 3
    op = sparse_op(4, n, p, d)
    st = init(op)
    while st.k < 12:
        expand(st)
        k = st.k
        assert st.basis_scalars() <= p * n * (k + 1) + p * d * (k + 1) ** 2
    assert st.basis_scalars() < p * n * d * st.k


def test_full_space_matches_dense():
    op = sparse_op(5, 6, 4, 3)
    st = init(op)
    while st.k < op.size:
        expand(st)
    pairs = extract_ritz(st, op.size, vectors=False)
    assert match_eigenvalues([q.value for q in pairs], dense_eigs(op)) <= 1e-9


def test_want_zero_is_empty():
    st = init(sparse_op(0, 5, 3, 1))
    assert extract_ritz(st, 0) == []


def test_restart_keeps_leading_values():
    op = sparse_op(6, 30, 6, 2)
    st = init(op)
    while st.k < 12:
        expand(st)
    before = [q.value for q in extract_ritz(st, 11, vectors=False)]
    restart(st, 11)
    check_state(st)
    after = [q.value for q in extract_ritz(st, 11, vectors=False)]
    # conjugate pairs tie in modulus, so compare as sets
    assert match_eigenvalues(after, before) <= 1e-10


def test_restart_after_convergence_is_stable():
    op = sparse_op(7, 40, 8, 2, shift=3.0)
    out = solve_dominant(op, 3, tol=1e-12)
    st = out.state
    ref = [q.value for q in out.pairs]
    restart(st, 3)
    for _ in range(4):
        expand(st)
    check_state(st)
    now = [q.value for q in extract_ritz(st, 3, vectors=False)]
    assert match_eigenvalues(now, ref) <= 1e-10


def test_restart_guards():
    st = init(sparse_op(0, 10, 3, 2))
    expand(st)
    with pytest.raises(InvalidArgument):
        restart(st, 0)
    with pytest.raises(InvalidArgument):
        restart(st, st.k)


def test_toy_model_gear2():
    g = toy_grid(1024)
    sys, exact = stuart_landau(0.1, 0.1, g)
    out = solve_dominant(assemble(sys, scheme("gear2")), 1)
    lam = out.pairs[0].value
    assert abs(lam.to_complex() - math.exp(0.2 * math.pi)) <= 5 * g.max_step ** 2
    assert lam.rel_diff(exact.multipliers[0]) < 1e-3


def test_random_sparse_dominant_values():
    op = sparse_op(8, 120, 16, 2)
    out = solve_dominant(op, 5, tol=1e-8)
    ref = sorted(dense_eigs(op), key=lambda v: -v.log2_abs())[:5]
    assert match_eigenvalues([q.value for q in out.pairs], ref) <= 1e-8
    d = out.diagnostics
    assert d.k_final >= 5 and d.history and d.gap is not None


def test_restarted_run_converges():
    # the dominant multiplier is well separated; a window of 4 forces restarts
    op = sparse_op(9, 60, 4, 2, density=0.1)
    out = solve_dominant(op, 1, tol=1e-10, k_max=4)
    assert out.diagnostics.restarts >= 1
    ref = sorted(dense_eigs(op), key=lambda v: -v.log2_abs())[:1]
    assert match_eigenvalues([q.value for q in out.pairs], ref) <= 1e-8
    assert max(q.residual for q in out.pairs) <= 1e-10


def test_iteration_limit():
    op = sparse_op(10, 60, 4, 2, density=0.1)
    with pytest.raises(IterationLimit) as info:
        solve_dominant(op, 4, tol=1e-15, k_max=6, max_cycles=1)
    assert info.value.best


def test_solve_dominant_argument_checks():
    op = sparse_op(0, 5, 3, 1)
    with pytest.raises(InvalidArgument):
        solve_dominant(op, 0)
    with pytest.raises(InvalidArgument):
        solve_dominant(op, 2, tol=0.0)
    with pytest.raises(InvalidArgument):
        solve_dominant(op, 6)


def test_residual_estimate_is_true_residual():
    op = sparse_op(11, 12, 5, 2)
    st = init(op)
    while st.k < 8:
        expand(st)
    for q in extract_ritz(st, 3):
        x = q.stacked
        y = x.copy()
        for s in range(1, op.p + 1):
            y = op.apply(s, y)
        lam = q.value.to_complex()
        true = np.linalg.norm(y - lam * x) / abs(lam)
        assert true == pytest.approx(q.residual, rel=1e-6, abs=1e-13)


@given(st.integers(1, 3), st.integers(2, 12), st.integers(1, 8), st.integers(0, 2 ** 31 - 1))
def test_expand_work_and_relations(d, n, p, seed):
    op = sparse_op(seed, n, p, d)
    st = init(op)
    for _ in range(min(4, op.size - 1)):
        op.reset_counters()
        expand(st)
        assert op.n_solves == p
        assert op.n_matvecs <= p * d
    check_state(st)


@given(st.integers(1, 3), st.integers(2, 8), st.integers(1, 6), st.integers(0, 2 ** 31 - 1))
def test_full_subspace_oracle(d, n, p, seed):
    op = sparse_op(seed, n, p, d)
    out = solve_dominant(op, op.size)
    assert match_eigenvalues([q.value for q in out.pairs], dense_eigs(op)) <= 1e-9
