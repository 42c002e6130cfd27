"""Floquet-level results: multipliers, slice eigenvectors and error metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidArgument
from .escale import ExponentScaledValue
from .lptv import SampledLptvSystem, assemble, companion_sequence
from .multistep import MultistepScheme, scheme as scheme_by_name
from .pschur import periodic_eigenvector, periodic_schur, sort_leading
from .ptoar import schur_basis, solve_dominant
from .spurious import SPURIOUS, scalar_roots, spurious_bound_log10, tag_spectrum

GAP_THRESHOLD = 1.0 - 1e-3
_DBL_MAX = np.finfo(float).max


@dataclass(frozen=True)
class GapReport:
    k: int
    mag_k: float
    mag_k1: float
    gap: float
    ill_separated: bool

    @property
    def advisory(self) -> str:
        if self.ill_separated:
            return (f"|lambda_{self.k + 1}|/|lambda_{self.k}| = {self.gap:.6g} is close "
                    "to 1; report the subspace angle of the cluster instead of "
                    "per-vector errors")
        return "well separated"


@dataclass
class FloquetSolution:
    """Dominant multipliers with per-slice eigenvectors.

    ``eigenvectors[m][i]`` is the unit state vector of multiplier ``m`` at
    slice ``i`` (``i = 0..p-1``); ``stacked[m]`` is the unit stacked vector at
    slice 0. ``spectrum`` holds every computed eigenvalue (the full
    ``nd`` spectrum on the dense path).
    """

    multipliers: list
    tags: list
    eigenvectors: list
    stacked: list
    residuals: list
    spectrum: list
    spectrum_tags: list
    gap: GapReport | None
    solver: str
    scheme: MultistepScheme
    n: int
    p: int
    diagnostics: dict = field(default_factory=dict)


def _propagated_residual(op, x0: np.ndarray, lam: ExponentScaledValue) -> float:
    """``||F x - lam x|| / (|lam| ||x||)`` by scaled propagation."""
    y = x0.astype(complex)
    logs = 0.0
    for s in range(1, op.p + 1):
        y = op.apply(s, y)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0 if lam.is_zero() else 1.0
        y /= nrm
        logs += math.log(nrm)
    if lam.is_zero():
        return math.inf
    scale = math.exp(logs - lam.log2_abs() * math.log(2.0))
    ph = lam.mantissa / abs(lam.mantissa)
    return float(np.linalg.norm(scale * y - ph * x0) / np.linalg.norm(x0))


def solve(system: SampledLptvSystem, sch, solver: str = "dense", k: int | None = None,
          tol: float = 1e-10, max_cycles: int = 20, seed: int = 0,
          start=None) -> FloquetSolution:
    """Dominant Floquet multipliers of a sampled LPTV system.

    Parameters
    ----------
    sch : MultistepScheme or str
        Discretization, e.g. ``"gear2"``.
    solver : {"dense", "ptoar"}
        Periodic QR on the explicit companions, or restarted pTOAR.
    k : int, optional
        Number of dominant pairs. Defaults to ``n`` (all physical ones).
    """
    if isinstance(sch, str):
        sch = scheme_by_name(sch)
    op = assemble(system, sch)
    n, p, nd = system.n, system.p, op.size
    k = n if k is None else int(k)
    if not 1 <= k <= nd:
        raise InvalidArgument(f"k must be in 1..{nd}, got {k}")
    pred = scalar_roots(sch, system.grid)
    diag = {}
    if solver == "dense":
        seq = companion_sequence(op)
        form = sort_leading(periodic_schur(seq))
        spectrum = form.eigenvalues
        mults, vecs, stacked, res = [], [], [], []
        for j in range(k):
            X = periodic_eigenvector(form, j)
            x0 = X[0] / np.linalg.norm(X[0])
            vs = [X[a][(sch.d - 1) * n:] for a in range(p)]
            vecs.append([v / np.linalg.norm(v) for v in vs])
            stacked.append(x0)
            mults.append(spectrum[j])
            res.append(_propagated_residual(op, x0, spectrum[j]))
        diag["sweeps"] = form.sweeps
        diag["schur_basis"] = form.Z[0][(sch.d - 1) * n:, :k]
    elif solver == "ptoar":
        out = solve_dominant(op, k, tol=tol, max_cycles=max_cycles, start=start, seed=seed)
        pairs = out.pairs
        mults = [q.value for q in pairs]
        vecs = [q.vectors for q in pairs]
        stacked = [q.stacked for q in pairs]
        res = [q.residual for q in pairs]
        spectrum = list(mults)
        d = out.diagnostics
        diag.update(restarts=d.restarts, k_final=d.k_final, history=d.history,
                    n_solves=d.n_solves, n_matvecs=d.n_matvecs,
                    basis_scalars=d.peak_basis_scalars, ptoar_gap=d.gap)
        diag["schur_basis"] = schur_basis(out.state, k)[(sch.d - 1) * n:]
        bound = spurious_bound_log10(pred)
        diag["below_spurious_bound"] = [i for i, v in enumerate(mults) if v.log10_abs() < bound]
    else:
        raise InvalidArgument(f"unknown solver {solver!r}; use 'dense' or 'ptoar'")
    spectrum_tags = tag_spectrum(spectrum, pred, n)
    tags = spectrum_tags[:len(mults)] if solver == "dense" else tag_spectrum(mults, pred, n)
    gap = None
    if solver == "dense" and len(spectrum) > k:
        gap = gap_report(spectrum, k)
    elif solver == "ptoar" and diag.get("ptoar_gap") is not None:
        g = diag["ptoar_gap"]
        gap = GapReport(k, abs_clamped(mults[-1]), abs_clamped(mults[-1]) * g, g, g > GAP_THRESHOLD)
    diag["spurious_roots"] = pred.roots
    return FloquetSolution(mults, tags, vecs, stacked, res, spectrum, spectrum_tags,
                           gap, solver, sch, n, p, diag)


def eigenvector_at_slice(sol: FloquetSolution, which: int, i: int) -> np.ndarray:
    if not 0 <= i < sol.p:
        raise InvalidArgument(f"slice must be in 0..{sol.p - 1}")
    return sol.eigenvectors[which][i]


def eig_error(computed, exact) -> float:
    """Relative multiplier error ``|lam - lam_exact| / |lam_exact|``."""
    e = exact if isinstance(exact, ExponentScaledValue) else ExponentScaledValue.from_complex(exact)
    if e.is_zero():
        raise InvalidArgument("exact value must be nonzero")
    c = computed if isinstance(computed, ExponentScaledValue) else ExponentScaledValue.from_complex(computed)
    return c.rel_diff(e)


def vec_error(computed, exact) -> float:
    """Relative vector error after optimal complex scaling of ``computed``."""
    xc = np.asarray(computed, dtype=complex).ravel()
    xe = np.asarray(exact, dtype=complex).ravel()
    ne = np.linalg.norm(xe)
    if ne == 0:
        raise InvalidArgument("exact vector must be nonzero")
    nc2 = np.vdot(xc, xc).real
    if nc2 == 0:
        return 1.0
    c = np.vdot(xc, xe) / nc2
    return float(np.linalg.norm(c * xc - xe) / ne)


def _orth(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A[:, None]
    Q, R = np.linalg.qr(A)
    dg = np.abs(np.diag(R))
    if dg.size == 0 or dg.min() <= 1e-12 * max(dg.max(), np.finfo(float).tiny):
        raise InvalidArgument("subspace basis is rank deficient")
    return Q


def subspace_angle(U, V) -> float:
    """Largest principal angle between ``span(U)`` and ``span(V)``, in radians."""
    Qu, Qv = _orth(U), _orth(V)
    if Qu.shape[0] != Qv.shape[0]:
        raise InvalidArgument("bases live in different dimensions")
    if Qv.shape[1] > Qu.shape[1]:
        Qu, Qv = Qv, Qu
    # sine form is accurate for small angles, cosine form for large ones
    s = np.linalg.svd(Qv - Qu @ (Qu.conj().T @ Qv), compute_uv=False).max()
    if s < math.sqrt(0.5):
        return float(math.asin(min(1.0, s)))
    c = np.linalg.svd(Qu.conj().T @ Qv, compute_uv=False).min()
    return float(math.acos(min(1.0, c)))


def gap_report(multipliers: Sequence, k: int) -> GapReport:
    mags = [m if isinstance(m, ExponentScaledValue) else ExponentScaledValue.from_complex(m)
            for m in multipliers]
    if len(mags) < k + 1 or k < 1:
        raise InvalidArgument(f"need at least {k + 1} multipliers")
    order = sorted(mags, key=lambda v: -v.log2_abs())
    a, b = order[k - 1], order[k]
    gap = 2.0 ** (b.log2_abs() - a.log2_abs()) if not a.is_zero() else math.nan
    return GapReport(k, abs_clamped(a), abs_clamped(b), gap, bool(gap > GAP_THRESHOLD))


def match_eigenvalues(a: Sequence, b: Sequence) -> float:
    """Largest relative difference under the best one-to-one matching."""
    if len(a) != len(b):
        raise InvalidArgument("eigenvalue lists differ in length")
    A = [v if isinstance(v, ExponentScaledValue) else ExponentScaledValue.from_complex(v) for v in a]
    B = [v if isinstance(v, ExponentScaledValue) else ExponentScaledValue.from_complex(v) for v in b]
    C = np.empty((len(A), len(B)))
    for i, x in enumerate(A):
        for j, y in enumerate(B):
            if y.is_zero():
                C[i, j] = 0.0 if x.is_zero() else 1e300
            else:
                C[i, j] = min(x.rel_diff(y), 1e300)
    r, c = linear_sum_assignment(C)
    return float(C[r, c].max()) if len(A) else 0.0


def abs_clamped(v: ExponentScaledValue) -> float:
    la = v.log2_abs()
    if la > 1023.99:
        return float(_DBL_MAX)
    return abs(v)


def eigenvalue_rows(sol: FloquetSolution) -> list:
    rows = []
    for i, (v, tag, r) in enumerate(zip(sol.multipliers, sol.tags, sol.residuals)):
        rows.append([i, v.mantissa.real, v.mantissa.imag, v.exponent, abs_clamped(v),
                     v.log10_abs(), tag, r])
    return rows


EIGEN_HEADER = ["index", "re_mantissa", "im_mantissa", "exponent2", "abs",
                "log10_abs", "tag", "residual"]
CONVERGENCE_HEADER = ["scheme", "p", "dt_max", "e_val", "e_vec", "angle"]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_eigen_csv(path, sol: FloquetSolution) -> None:
    write_csv(path, EIGEN_HEADER, eigenvalue_rows(sol))


def is_spurious(tag: str) -> bool:
    return tag == SPURIOUS
