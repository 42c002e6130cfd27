"""End-to-end acceptance criteria.

Each test records a one-line PASS/FAIL verdict (printed in the terminal
summary) and then asserts it, so a failing criterion shows up in both places.
"""

import math
import time

import numpy as np
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from floquetms import bench, dae
from floquetms.floquet import match_eigenvalues, solve, vec_error
from floquetms.grid import build_pattern, build_uniform, from_times
from floquetms.lptv import SampledLptvSystem, assemble, companion_sequence
from floquetms.multistep import MultistepScheme, scheme
from floquetms.pschur import explicit_product, periodic_schur
from floquetms.ptoar import expand, init, solve_dominant
from floquetms.spurious import SPURIOUS, scalar_roots

TOY_P = [64, 128, 256, 512, 1024]


def test_criterion_1_convergence_orders(acceptance):
    t0 = time.perf_counter()
    exact = bench.stuart_landau_exact(0.1, 0.1)
    assert abs(exact.multipliers[0].to_complex() - math.exp(0.2 * math.pi)) <= 1e-12
    study = bench.run_convergence(exact, ["be", "gear2", "gear3"], TOY_P, pattern=(1.0, 2.0))
    elapsed = time.perf_counter() - t0
    want = {"be": (1, 0.2), "gear2": (2, 0.2), "gear3": (3, 0.25)}
    ok = elapsed < 30
    parts = []
    for name, (order, tol) in want.items():
        sv, se = study.slopes[name]["e_val"], study.slopes[name]["e_vec"]
        ok &= abs(sv - order) <= tol and abs(se - order) <= tol
        parts.append(f"{name} {sv:.3f}/{se:.3f}")
    assert acceptance(1, ok, "slopes e_val/e_vec: " + ", ".join(parts) + f"; {elapsed:.1f}s")


def test_criterion_2_spurious_decay(acceptance):
    t0 = time.perf_counter()
    exact = bench.stuart_landau_exact(0.1, 0.1)
    p_values = [64, 128, 256, 512]
    slopes, _ = bench.spurious_slope(exact, "gear2", p_values)
    nu2 = scalar_roots(scheme("gear2"), bench.toy_grid(64)).spurious_roots[0]
    ref = math.log10(abs(nu2))
    slope_ok = all(abs(s - ref) <= 0.1 * abs(ref) for s in slopes) and len(slopes) == 2
    counts = []
    for p in p_values:
        sol = solve(bench.sample(exact, bench.toy_grid(p)), "gear3", solver="dense")
        counts.append(sum(t == SPURIOUS for t in sol.spectrum_tags))
    elapsed = time.perf_counter() - t0
    ok = slope_ok and all(c == 4 for c in counts) and elapsed < 30
    detail = (f"gear2 slopes {[round(s, 4) for s in slopes]} vs log10|nu2| {ref:.4f}; "
              f"gear3 spurious counts {counts}; {elapsed:.1f}s")
    assert acceptance(2, ok, detail)


def _random_case(rng):
    n = int(rng.integers(2, 51))
    p = int(rng.integers(1, 17))
    d = int(rng.integers(1, 4))
    grid = build_uniform(p, 1.0)
    samples = [sp.random(n, n, density=min(1.0, 4.0 / n), random_state=int(rng.integers(2 ** 30)))
               - 0.5 * sp.identity(n) for _ in range(p)]
    return assemble(SampledLptvSystem(grid, [s.tocsc() for s in samples]), MultistepScheme(d))


def test_criterion_3_oracle_equivalence(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    worst_ptoar, worst_explicit, checked = 0.0, 0.0, 0
    for _ in range(20):
        op = _random_case(rng)
        seq = companion_sequence(op)
        form = periodic_schur(seq)
        dense = form.eigenvalues
        full = solve_dominant(op, op.size, tol=1e-10)
        worst_ptoar = max(worst_ptoar, match_eigenvalues([q.value for q in full.pairs], dense))
        logs = form.log2_magnitudes() / math.log2(10.0)
        if logs.max() < 12 and logs.min() > -12:
            # the explicit product is only normwise accurate: measure against its radius
            w = np.linalg.eigvals(explicit_product(seq))
            z = np.array([v.to_complex() for v in dense])
            radius = np.abs(w).max()
            C = np.abs(z[:, None] - w[None, :])
            r, c = linear_sum_assignment(C)
            worst_explicit = max(worst_explicit, C[r, c].max() / radius)
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst_ptoar <= 1e-9 and worst_explicit <= 1e-9 and elapsed < 60
    detail = (f"pTOAR vs periodic QR {worst_ptoar:.1e}; periodic QR vs explicit "
              f"{worst_explicit:.1e} (radius-relative, {checked} cases); {elapsed:.1f}s")
    assert acceptance(3, ok, detail)


def test_criterion_4_memory_contract(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    n, p, d, k = 500, 32, 3, 30
    grid = build_uniform(p, 1.0)
    samples = [(sp.random(n, n, density=5.0 / n, random_state=int(rng.integers(2 ** 30)))
                - sp.identity(n)).tocsc() for _ in range(p)]
    op = assemble(SampledLptvSystem(grid, samples), MultistepScheme(d))
    state = init(op, seed=1)
    while state.k < k:
        expand(state)
    basis, projected = state.basis_scalars(), state.projected_scalars()
    bound = p * n * (k + 1) + p * d * (k + 1) ** 2 + p * (k + 1) ** 2
    frac = basis / (p * n * d * k)
    elapsed = time.perf_counter() - t0
    ok = basis + projected <= bound and frac < 0.4 and elapsed < 20
    detail = (f"stored {basis + projected} <= bound {bound}; Q+U is {100 * frac:.1f}% "
              f"of p*n*d*k; {elapsed:.1f}s")
    assert acceptance(4, ok, detail)


_WORK = {"ok": True, "cases": 0}


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 16), n=st.integers(2, 12), p=st.integers(1, 8),
       d=st.integers(1, 4), sparse=st.booleans())
def _check_work(seed, n, p, d, sparse):
    rng = np.random.default_rng(seed)
    grid = build_uniform(p, 1.0)
    mats = [rng.standard_normal((n, n)) - 2 * np.eye(n) for _ in range(p)]
    if sparse:
        mats = [sp.csc_matrix(m) for m in mats]
    op = assemble(SampledLptvSystem(grid, mats), MultistepScheme(d))
    state = init(op, seed=seed)
    for _ in range(min(4, op.size - 1)):
        s0, m0 = op.n_solves, op.n_matvecs
        expand(state)
        good = op.n_solves - s0 == p and op.n_matvecs - m0 <= p * d
        _WORK["ok"] &= good
        assert good
    # unrestarted and restarted full runs
    k = min(2, op.size)
    out = solve_dominant(op, k, tol=1e-8, k_max=op.size)
    dg = out.diagnostics
    good = dg.n_solves == p * dg.k_final if dg.restarts == 0 else dg.n_solves == p * dg.expansions
    _WORK["ok"] &= good
    _WORK["cases"] += 1
    assert good


def test_criterion_5_work_contract(acceptance):
    t0 = time.perf_counter()
    try:
        _check_work()
    finally:
        elapsed = time.perf_counter() - t0
        ok = _WORK["ok"] and elapsed < 5
        acceptance(5, ok, f"p solves and <= p*d matvecs per column, solves = p*k_final; "
                          f"{_WORK['cases']} cases; {elapsed:.1f}s")
    assert ok


def _zero_cases():
    yield build_uniform(9, 1.0)
    yield build_pattern(2.0, (1.0, 2.0), 6)
    yield build_pattern(1.0, (1.0, 0.6, 1.4), 3)
    rng = np.random.default_rng(7)
    steps = rng.uniform(0.5, 1.5, 10)
    yield from_times(np.concatenate([[0.0], np.cumsum(steps)]), (0.2, 5.0))


def test_criterion_6_zero_system_exactness(acceptance):
    t0 = time.perf_counter()
    worst_one, worst_spur, ok = 0.0, 0.0, True
    for grid in _zero_cases():
        for d in (1, 2, 3, 4):
            for n in (1, 3):
                sch = MultistepScheme(d)
                sys0 = SampledLptvSystem(grid, [np.zeros((n, n)) for _ in range(grid.p)])
                form = periodic_schur(companion_sequence(assemble(sys0, sch)))
                vals = sorted(form.eigenvalues, key=lambda v: -v.log2_abs())
                ones = vals[:n]
                worst_one = max(worst_one, max(abs(v.to_complex() - 1.0) for v in ones))
                pred = sorted((x for x in scalar_roots(sch, grid).predicted_log10_magnitudes
                               for _ in range(n)), reverse=True)
                got = [v.log10_abs() for v in vals[n:]]
                ok &= len(got) == (d - 1) * n
                if got:
                    worst_spur = max(worst_spur, float(np.max(np.abs(np.array(got) - pred))))
    elapsed = time.perf_counter() - t0
    ok &= worst_one <= 1e-12 and worst_spur <= 1e-10 and elapsed < 5
    detail = f"|lambda - 1| {worst_one:.1e}; spurious log10 error {worst_spur:.1e}; {elapsed:.1f}s"
    assert acceptance(6, ok, detail)


def test_criterion_7_dae_decoupling(acceptance):
    t0 = time.perf_counter()
    core, exact = bench.stuart_landau(0.1, 0.1, bench.toy_grid(256))
    want = solve(core, "gear2").multipliers
    worst_mult, worst_res = 0.0, 0.0
    for transpose in (True, False):
        dsys = dae.embed_core(core, n2=3, seed=11, transpose=transpose)
        for solver in ("dense", "ptoar"):
            sol = solve(dae.decouple(dsys, transpose), "gear2", solver=solver, k=2)
            worst_mult = max(worst_mult, match_eigenvalues(sol.multipliers, want))
            for m in range(2):
                for i in range(0, core.p, 17):
                    y1 = sol.eigenvectors[m][i]
                    y2 = dae.recover_algebraic(dsys, i, y1, transpose)
                    worst_res = max(worst_res, dae.algebraic_residual(dsys, i, y1, y2, transpose))
    elapsed = time.perf_counter() - t0
    ok = worst_mult <= 1e-8 and worst_res <= 1e-10 and elapsed < 10
    detail = (f"multipliers vs embedded core {worst_mult:.1e}; algebraic residual "
              f"{worst_res:.1e}; {elapsed:.1f}s")
    assert acceptance(7, ok, detail)


def test_criterion_8_coupled_stuart_landau(acceptance):
    t0 = time.perf_counter()
    orbit = bench.find_antiphase_orbit(0.5, 0.1)
    coarse, _ = bench.coupled_stuart_landau(0.5, 0.1, 1024, orbit)
    fine, _ = bench.coupled_stuart_landau(0.5, 0.1, 4096, orbit)
    a = solve(coarse, "gear4", k=4).multipliers
    b = solve(fine, "gear4", k=4).multipliers
    osc = min(abs(v.to_complex() - 1.0) for v in a)
    agree = match_eigenvalues(a, b)
    elapsed = time.perf_counter() - t0
    ok = orbit.residual <= 1e-10 and osc <= 1e-4 and agree <= 1e-5 and elapsed < 60
    detail = (f"period {orbit.period:.6f}; |lambda_osc - 1| {osc:.1e}; vs 4x finer "
              f"{agree:.1e}; {elapsed:.1f}s")
    assert acceptance(8, ok, detail)


def test_criterion_9_clustered_multipliers(acceptance):
    t0 = time.perf_counter()
    exact = bench.clustered_system()
    mags = sorted((abs(v.to_complex()) for v in exact.multipliers), reverse=True)
    assert mags[0] - mags[2] <= 1e-4 * (1 + 1e-9) and mags[2] - mags[3] >= 1e-2
    ok = True
    parts = []
    for name, order in (("gear2", 2), ("gear3", 3)):
        study = bench.run_convergence(exact, [name], TOY_P, cluster=3)
        min_vec = math.inf
        for p in TOY_P:
            sol = solve(bench.sample(exact, bench.toy_grid(p)), name, k=3)
            for j in range(3):
                lam = exact.multipliers[j].to_complex()
                m = int(np.argmin([abs(v.to_complex() - lam) for v in sol.multipliers]))
                min_vec = min(min_vec, vec_error(sol.eigenvectors[m][0], exact.vectors0[:, j]))
        s = study.slopes[name]["angle"]
        ok &= min_vec >= 1e-3 and abs(s - order) <= 0.3
        parts.append(f"{name} min e_vec {min_vec:.1e}, angle slope {s:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    assert acceptance(9, ok, "; ".join(parts) + f"; {elapsed:.1f}s")
