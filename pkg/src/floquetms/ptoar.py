"""Periodic Arnoldi with a two-level compressed basis.

The periodic Arnoldi relation over one period is::

    L^{(s)} V^{(s-1)} = V^{(s)} T^{(s)},      s = 1..p,

with ``V^{(p)} = V^{(0)}``. ``V^{(0)}`` carries one extra column (the
residual direction), so ``T^{(p)}`` is ``(k+1) x k`` upper Hessenberg while
the other ``T^{(s)}`` are ``k x k`` upper triangular.

Block ``j`` of every stacked column of ``V^{(s)}`` is a state at time index
``s - d + 1 + j``. All blocks that refer to the same time index (mod p) share
one orthonormal basis ``Q[q]``::

    V_j^{(s)} = Q[(s - d + 1 + j) mod p] @ U[s][j]

so each slice adds at most one length-``n`` vector per expansion and the
rest of the bookkeeping happens on small coordinate matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BreakdownError, InvalidArgument, IterationLimit
from .escale import ExponentScaledValue
from .lptv import CompanionOperator
from .pschur import periodic_eigenvector, periodic_schur, sort_leading

log = logging.getLogger(__name__)

BREAKDOWN_TOL = 1e-14
APPEND_TOL = 1e-14
SVD_RANK_TOL = 1e-14


def _cgs2(B: np.ndarray, w: np.ndarray):
    """Classical Gram-Schmidt with one reorthogonalization; returns (h, r)."""
    if B.shape[1] == 0:
        return np.zeros(0, dtype=complex), w.copy()
    h = B.conj().T @ w
    r = w - B @ h
    h2 = B.conj().T @ r
    r -= B @ h2
    return h + h2, r


@dataclass
class RitzPair:
    """Approximate Floquet pair.

    ``vectors[a]`` is the state at slice ``a`` (unit norm) and ``stacked``
    the unit-norm stacked vector of slice 0.
    """

    value: ExponentScaledValue
    vectors: list
    residual: float
    stacked: np.ndarray | None = None


@dataclass
class Diagnostics:
    history: list = field(default_factory=list)
    k_final: int = 0
    restarts: int = 0
    gap: float | None = None
    n_solves: int = 0
    n_matvecs: int = 0
    expansions: int = 0
    peak_basis_scalars: int = 0
    locked: int = 0


class PeriodicArnoldiState:
    """Compressed periodic Arnoldi basis together with its projected factors."""

    def __init__(self, op: CompanionOperator, seed: int = 0):
        self.op = op
        self.n, self.d, self.p = op.n, op.d, op.p
        n, d, p = self.n, self.d, self.p
        self.Q = [np.zeros((n, 0), dtype=complex) for _ in range(p)]
        self.U = [[np.zeros((0, 0), dtype=complex) for _ in range(d)] for _ in range(p)]
        self.T = [np.zeros((0, 0), dtype=complex) for _ in range(p - 1)]
        self.T.append(np.zeros((1, 0), dtype=complex))
        self.k = 0
        self.exhausted = False
        self.rng = np.random.default_rng(seed)
        self.refs = [[] for _ in range(p)]
        for s in range(p):
            for j in range(d):
                self.refs[self.qindex(s, j)].append((s, j))
        self.peak_basis = 0

    # -- layout helpers -------------------------------------------------
    def qindex(self, s: int, j: int) -> int:
        return (s - self.d + 1 + j) % self.p

    def ncols(self, s: int) -> int:
        return self.k + 1 if s % self.p == 0 else self.k

    def stacked_U(self, s: int) -> np.ndarray:
        return np.vstack(self.U[s])

    def _split(self, s: int, u: np.ndarray) -> list:
        out, pos = [], 0
        for j in range(self.d):
            r = self.Q[self.qindex(s, j)].shape[1]
            out.append(u[pos:pos + r])
            pos += r
        return out

    def column_blocks(self, s: int, col: int) -> list:
        """Full state blocks of column ``col`` of ``V^{(s)}``."""
        return [self.Q[self.qindex(s, j)] @ self.U[s][j][:, col] for j in range(self.d)]

    def dense_V(self, s: int) -> np.ndarray:
        """Assembled ``V^{(s)}`` (checks only)."""
        return np.vstack([self.Q[self.qindex(s, j)] @ self.U[s][j] for j in range(self.d)])

    # -- storage accounting -----------------------------------------------
    def basis_scalars(self) -> int:
        """Stored scalars of ``Q`` and ``U`` (the compressed basis)."""
        return (sum(q.size for q in self.Q)
                + sum(u.size for row in self.U for u in row))

    def projected_scalars(self) -> int:
        return sum(t.size for t in self.T)

    def _track_peak(self):
        self.peak_basis = max(self.peak_basis, self.basis_scalars())

    # -- basis growth --------------------------------------------------------
    def _grow_q(self, q: int, r: np.ndarray):
        self.Q[q] = np.column_stack([self.Q[q], r])
        for s, j in self.refs[q]:
            U = self.U[s][j]
            self.U[s][j] = np.vstack([U, np.zeros((1, U.shape[1]), dtype=complex)])

    def _absorb(self, q: int, x: np.ndarray) -> np.ndarray:
        """Coordinates of ``x`` in ``Q[q]``, growing ``Q[q]`` if needed."""
        c, r = _cgs2(self.Q[q], x.astype(complex))
        nr = np.linalg.norm(r)
        nx = np.linalg.norm(x)
        if nx > 0 and nr > APPEND_TOL * nx:
            self._grow_q(q, r / nr)
            c = np.append(c, nr)
        return c

    def _append_column(self, s: int, u_blocks: list):
        for j in range(self.d):
            U = self.U[s][j]
            col = u_blocks[j]
            if col.size < U.shape[0]:
                col = np.concatenate([col, np.zeros(U.shape[0] - col.size, dtype=complex)])
            self.U[s][j] = np.column_stack([U, col])

    def _random_direction(self, s: int, nb: int) -> np.ndarray:
        """Unit coordinates in space ``s`` orthogonal to its first ``nb`` columns."""
        for attempt in range(2 * self.d + 2):
            j = (self.d - 1 - attempt) % self.d
            x = self.rng.standard_normal(self.n)
            cj = self._absorb(self.qindex(s, j), x)
            blocks = [np.zeros(self.Q[self.qindex(s, jj)].shape[1], dtype=complex)
                      for jj in range(self.d)]
            blocks[j][:cj.size] = cj
            u = np.concatenate(blocks)
            _, r = _cgs2(self.stacked_U(s)[:, :nb], u)
            nr = np.linalg.norm(r)
            if nr > 1e-8 * np.linalg.norm(u):
                return r / nr
        raise BreakdownError(f"could not extend the basis of space {s}")


def init(op: CompanionOperator, start=None, seed: int = 0) -> PeriodicArnoldiState:
    """Start vector in space 0 followed by one propagation cycle (k = 1)."""
    nd = op.size
    if start is None:
        start = np.ones(nd)
    start = np.asarray(start, dtype=complex).ravel()
    if start.size != nd:
        raise InvalidArgument(f"start vector must have length {nd}")
    nrm = np.linalg.norm(start)
    if not nrm > 0 or not np.isfinite(nrm):
        raise InvalidArgument("start vector must be nonzero and finite")
    st = PeriodicArnoldiState(op, seed)
    v = start / nrm
    n = op.n
    u_blocks = []
    for j in range(op.d):
        u_blocks.append(st._absorb(st.qindex(0, j), v[j * n:(j + 1) * n]))
    # blocks sharing a Q (p < d) may need padding after later growth
    u_blocks = [np.concatenate([b, np.zeros(st.Q[st.qindex(0, j)].shape[1] - b.size)])
                for j, b in enumerate(u_blocks)]
    u = np.concatenate(u_blocks)
    u /= np.linalg.norm(u)
    for j in range(op.d):
        st.U[0][j] = np.zeros((st.Q[st.qindex(0, j)].shape[1], 0), dtype=complex)
    for s in range(1, op.p):
        for j in range(op.d):
            st.U[s][j] = np.zeros((st.Q[st.qindex(s, j)].shape[1], 0), dtype=complex)
    st._append_column(0, st._split(0, u))
    st._track_peak()
    expand(st)
    return st


def expand(st: PeriodicArnoldiState) -> bool:
    """Add one column to every space. Returns True on an invariant subspace."""
    op = st.op
    n, d, p, k = st.n, st.d, st.p, st.k
    nd = n * d
    if k >= nd:
        raise InvalidArgument(f"subspace already spans all {nd} dimensions")
    invariant = False
    newT = []
    for s in range(1, p + 1):
        sp_ = s % p  # output space
        src = s - 1
        col = k  # newest column of the source space
        blocks = st.column_blocks(src, col)
        x = op.last_block(s, blocks)
        # coordinates of w = L^{(s)} v: shifted blocks reuse old coordinates
        last = st._absorb(st.qindex(sp_, d - 1), x)
        u_blocks = [st.U[src][j + 1][:, col].copy() for j in range(d - 1)] + [last]
        u_blocks = [np.concatenate([b, np.zeros(st.Q[st.qindex(sp_, j)].shape[1] - b.size)])
                    for j, b in enumerate(u_blocks)]
        u = np.concatenate(u_blocks)
        B = st.stacked_U(sp_)
        nb = k + 1 if sp_ == 0 else k
        B = B[:, :nb]
        h, r = _cgs2(B, u)
        beta = np.linalg.norm(r)
        wn = np.linalg.norm(u)
        Tcol = np.zeros(nb + 1, dtype=complex)
        Tcol[:nb] = h
        full = sp_ == 0 and nb + 1 > nd
        if beta <= BREAKDOWN_TOL * max(wn, np.finfo(float).tiny) or full:
            if sp_ == 0:
                invariant = True
            if full:
                newcol = np.zeros_like(u)
                st.exhausted = True
            else:
                newcol = st._random_direction(sp_, nb)
        else:
            Tcol[nb] = beta
            newcol = r / beta
        newT.append(Tcol)
        st._append_column(sp_, st._split(sp_, newcol))
    # grow the projected factors
    for s in range(1, p + 1):
        Told = st.T[s - 1]
        col = newT[s - 1]
        if s < p:
            T = np.zeros((k + 1, k + 1), dtype=complex)
            T[:k, :k] = Told
        else:
            T = np.zeros((k + 2, k + 1), dtype=complex)
            T[:k + 1, :k] = Told
        T[:, k] = col
        st.T[s - 1] = T
    st.k = k + 1
    st._track_peak()
    return invariant


def _square_factors(st: PeriodicArnoldiState) -> list:
    k = st.k
    return [T for T in st.T[:-1]] + [st.T[-1][:k, :k]]


def _coupling(st: PeriodicArnoldiState) -> np.ndarray:
    return st.T[-1][st.k, :]


def extract_ritz(st: PeriodicArnoldiState, want: int, vectors: bool = True) -> list:
    """Largest ``want`` Ritz pairs, sorted by descending magnitude."""
    if want < 0 or want > st.k:
        raise InvalidArgument(f"want must be in 0..{st.k}")
    if want == 0:
        return []
    form = sort_leading(periodic_schur(_square_factors(st)), want)
    c = _coupling(st)
    pairs = []
    eigs = form.eigenvalues
    for j in range(want):
        X = periodic_eigenvector(form, j)
        theta = form.R[-1, j, j]
        y0 = np.linalg.norm(X[0])
        num = abs(c @ X[-1])
        if num == 0:
            res = 0.0
        elif theta == 0:
            res = np.inf
        else:
            res = float(num / (abs(theta) * y0))
        vecs, stacked = [], None
        if vectors:
            for a in range(st.p):
                last = st.Q[a] @ (st.U[a][st.d - 1][:, :st.k] @ X[a])
                nrm = np.linalg.norm(last)
                vecs.append(last / nrm if nrm > 0 else last)
            sv = st.dense_V(0)[:, :st.k] @ X[0]
            stacked = sv / np.linalg.norm(sv)
        pairs.append(RitzPair(eigs[j], vecs, res, stacked))
    return pairs


def schur_basis(st: PeriodicArnoldiState, want: int) -> np.ndarray:
    """Stacked slice-0 basis of the dominant ``want``-dim Ritz subspace."""
    form = sort_leading(periodic_schur(_square_factors(st)), want)
    return st.dense_V(0)[:, :st.k] @ form.Z[0][:, :want]


def restart(st: PeriodicArnoldiState, keep: int, lock_tol: float | None = None) -> int:
    """Krylov-Schur truncation to ``keep`` columns; returns the locked count.

    The leading positions whose coupling is below ``lock_tol`` relative to
    the last diagonal entry are decoupled exactly (set to zero).
    """
    k, p, d = st.k, st.p, st.d
    if not 1 <= keep < k:
        raise InvalidArgument(f"keep must satisfy 1 <= keep < k={k}, got {keep}")
    form = sort_leading(periodic_schur(_square_factors(st)), keep)
    c = _coupling(st)
    Z, R = form.Z, form.R
    b = c @ Z[-1][:, :keep]
    locked = 0
    if lock_tol is not None:
        for j in range(keep):
            if abs(b[j]) <= lock_tol * abs(R[-1, j, j]):
                b[j] = 0.0
                locked += 1
            else:
                break
    for a in range(p):
        for j in range(d):
            U = st.U[a][j]
            new = U[:, :k] @ Z[a][:, :keep]
            if a == 0:
                new = np.column_stack([new, U[:, k]])
            st.U[a][j] = new
    for a in range(p - 1):
        st.T[a] = R[a, :keep, :keep].copy()
    Tp = np.zeros((keep + 1, keep), dtype=complex)
    Tp[:keep] = R[-1, :keep, :keep]
    Tp[keep] = b
    st.T[-1] = Tp
    st.k = keep
    st.exhausted = False
    _truncate_q(st)
    return locked


def _truncate_q(st: PeriodicArnoldiState):
    """Shrink every ``Q[q]`` to the range actually used by its ``U`` blocks."""
    for q in range(st.p):
        refs = st.refs[q]
        W = np.hstack([st.U[s][j] for s, j in refs])
        if W.size == 0:
            continue
        P, sv, _ = np.linalg.svd(W, full_matrices=False)
        if sv.size == 0 or sv[0] == 0:
            rank = 0
        else:
            rank = int(np.sum(sv > SVD_RANK_TOL * sv[0]))
        if rank >= st.Q[q].shape[1]:
            continue
        P = P[:, :rank]
        st.Q[q] = st.Q[q] @ P
        for s, j in refs:
            st.U[s][j] = P.conj().T @ st.U[s][j]


def arnoldi_residuals(st: PeriodicArnoldiState) -> np.ndarray:
    """``||L^{(s)} V^{(s-1)} - V^{(s)} T^{(s)}|| / ||T^{(s)}||`` per slice (dense check)."""
    out = np.empty(st.p)
    for s in range(1, st.p + 1):
        Vin = st.dense_V(s - 1)[:, :st.k]
        Vout = st.dense_V(s % st.p)
        if s < st.p:
            Vout = Vout[:, :st.k]
        lhs = np.column_stack([st.op.apply(s, Vin[:, c]) for c in range(st.k)])
        rhs = Vout @ st.T[s - 1]
        out[s - 1] = np.linalg.norm(lhs - rhs) / max(np.linalg.norm(st.T[s - 1]), np.finfo(float).tiny)
    return out


def orthonormality_defects(st: PeriodicArnoldiState) -> tuple:
    """Largest ``||Q^H Q - I||`` and ``||U^H U - I||`` over all spaces."""
    qd = max((np.linalg.norm(q.conj().T @ q - np.eye(q.shape[1])) for q in st.Q), default=0.0)
    ud = 0.0
    for s in range(st.p):
        U = st.stacked_U(s)
        ncol = st.ncols(s)
        if s == 0 and st.exhausted:
            ncol -= 1
        U = U[:, :ncol]
        ud = max(ud, np.linalg.norm(U.conj().T @ U - np.eye(U.shape[1])))
    return qd, ud


@dataclass
class DominantResult:
    pairs: list
    diagnostics: Diagnostics
    state: PeriodicArnoldiState


def solve_dominant(op: CompanionOperator, k_want: int, tol: float = 1e-10,
                   max_cycles: int = 20, start=None, seed: int = 0,
                   k_max: int | None = None) -> DominantResult:
    """Dominant ``k_want`` eigenpairs of ``F_{p,0}`` by restarted pTOAR.

    Raises
    ------
    IterationLimit
        If ``max_cycles`` restarts do not converge; ``best`` holds the
        current pairs.
    """
    if k_want < 1:
        raise InvalidArgument("k_want must be >= 1")
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    nd = op.size
    if k_want > nd:
        raise InvalidArgument(f"k_want={k_want} exceeds the problem size {nd}")
    if k_max is None:
        k_max = max(2 * k_want + 10, 30)
    k_max = min(k_max, nd)
    # k_want + 5 leaders, leaving at least half the window for new columns
    keep = max(1, min(k_want + 5, (k_want + k_max) // 2, k_max - 1))
    n0, m0 = op.n_solves, op.n_matvecs
    diag = Diagnostics()
    st = init(op, start, seed)
    diag.expansions = 1
    check_every = 1 if op.p * k_max <= 4096 else 4
    while True:
        invariant = False
        while st.k < k_max:
            ready = st.k >= k_want and ((st.k - k_want) % check_every == 0)
            if ready and _converged(st, k_want, tol, diag):
                return _finish(st, k_want, diag, op, n0, m0)
            invariant = expand(st)
            diag.expansions += 1
            if invariant and st.k >= k_want:
                break
        if st.k >= k_want and _converged(st, k_want, tol, diag):
            return _finish(st, k_want, diag, op, n0, m0)
        if st.k >= nd:
            # the whole space is spanned: the projected problem is exact
            return _finish(st, k_want, diag, op, n0, m0)
        if diag.restarts >= max_cycles:
            best = extract_ritz(st, min(k_want, st.k))
            raise IterationLimit(
                f"pTOAR did not converge within {max_cycles} restarts",
                best=best, history=diag.history,
            )
        diag.locked = restart(st, keep, lock_tol=tol)
        diag.restarts += 1
        log.debug("restart %d, locked %d", diag.restarts, diag.locked)


def _converged(st, k_want, tol, diag) -> bool:
    pairs = extract_ritz(st, k_want, vectors=False)
    worst = max(p.residual for p in pairs)
    diag.history.append(worst)
    return worst <= tol


def _finish(st, k_want, diag, op, n0, m0) -> DominantResult:
    m = min(k_want + 1, st.k)
    pairs = extract_ritz(st, m)
    if len(pairs) > k_want:
        a, b = pairs[k_want - 1].value, pairs[k_want].value
        if not a.is_zero():
            diag.gap = 2.0 ** (b.log2_abs() - a.log2_abs())
        pairs = pairs[:k_want]
    diag.k_final = st.k
    diag.n_solves = op.n_solves - n0
    diag.n_matvecs = op.n_matvecs - m0
    diag.peak_basis_scalars = st.peak_basis
    return DominantResult(pairs, diag, st)
