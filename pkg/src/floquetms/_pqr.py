"""Compiled kernels for the complex periodic QR algorithm.

Storage convention: ``A[a]`` maps coordinate space ``a`` to space
``(a + 1) % p`` and every update keeps ``A[a] = Z[a+1]^H L[a] Z[a]``.
``A[0..p-2]`` are upper triangular, ``A[p-1]`` is upper Hessenberg during
the iteration and upper triangular on exit.
"""

import math

import numpy as np
from numba import njit

STALL_ITS = 20
EPS = np.finfo(np.float64).eps


@njit(cache=True)
def _givens(f, g):
    # returns (c, s, r) with [[c, s], [-conj(s), c]] @ [f, g] = [r, 0]
    ag = abs(g)
    if ag == 0.0:
        return 1.0, 0.0 + 0.0j, f
    af = abs(f)
    if af == 0.0:
        return 0.0, np.conj(g) / ag, ag + 0.0j
    nrm = math.hypot(af, ag)
    ph = f / af
    return af / nrm, ph * np.conj(g) / nrm, ph * nrm


@njit(cache=True)
def _rot_rows(X, r1, r2, c, s, j0=0):
    # columns left of j0 are structurally zero in both rows
    m = X.shape[1]
    cs = np.conj(s)
    for j in range(j0, m):
        x1 = X[r1, j]
        x2 = X[r2, j]
        X[r1, j] = c * x1 + s * x2
        X[r2, j] = -cs * x1 + c * x2


@njit(cache=True)
def _rot_cols(X, c1, c2, c, s, i1=-1):
    # X <- X @ G^H on columns (c1, c2); rows from i1 on are structurally zero
    m = X.shape[0] if i1 < 0 else min(i1, X.shape[0])
    cs = np.conj(s)
    for i in range(m):
        x1 = X[i, c1]
        x2 = X[i, c2]
        X[i, c1] = c * x1 + cs * x2
        X[i, c2] = -s * x1 + c * x2


@njit(cache=True)
def _house(x):
    # Hermitian reflector I - 2 v v^H / (v^H v) with H x = beta e_1
    n = x.shape[0]
    v = x.copy()
    nrm = 0.0
    for i in range(n):
        nrm = math.hypot(nrm, abs(x[i]))
    if nrm == 0.0:
        return v, 0.0
    a0 = abs(x[0])
    ph = x[0] / a0 if a0 > 0 else 1.0 + 0.0j
    v[0] = x[0] + ph * nrm
    vv = 0.0
    for i in range(n):
        vv += v[i].real ** 2 + v[i].imag ** 2
    return v, 2.0 / vv


@njit(cache=True)
def _rot_zt(Zt, c1, c2, c, s):
    # same update as _rot_cols on Z, applied to rows of Zt = Z^T
    m = Zt.shape[1]
    cs = np.conj(s)
    for i in range(m):
        x1 = Zt[c1, i]
        x2 = Zt[c2, i]
        Zt[c1, i] = c * x1 + cs * x2
        Zt[c2, i] = -s * x1 + c * x2


@njit(cache=True)
def _house_left(X, k0, v, tau, j0=0):
    # X[k0:, j0:] <- H X[k0:, j0:], row-major for contiguous access
    n = v.shape[0]
    m = X.shape[1]
    w = np.zeros(m - j0, dtype=np.complex128)
    for i in range(n):
        vi = np.conj(v[i])
        for j in range(j0, m):
            w[j - j0] += vi * X[k0 + i, j]
    for i in range(n):
        vi = v[i] * tau
        for j in range(j0, m):
            X[k0 + i, j] -= vi * w[j - j0]


@njit(cache=True)
def _house_right(X, k0, v, tau):
    # X[:, k0:] <- X[:, k0:] H
    n = v.shape[0]
    m = X.shape[0]
    for i in range(m):
        w = 0.0 + 0.0j
        for j in range(n):
            w += X[i, k0 + j] * v[j]
        w *= tau
        for j in range(n):
            X[i, k0 + j] -= w * np.conj(v[j])


@njit(cache=True)
def hess_triangular(A, Z):
    """Reduce to periodic Hessenberg-triangular form in place."""
    p, m, _ = A.shape
    h = p - 1
    for j in range(m - 1):
        for a in range(p - 1):
            v, tau = _house(A[a, j:, j].copy())
            if tau != 0.0:
                _house_left(A[a], j, v, tau, j)
                b = a + 1
                _house_right(A[b], j, v, tau)
                _house_right(Z[b], j, v, tau)
            for i in range(j + 1, m):
                A[a, i, j] = 0.0
        if j < m - 2:
            v, tau = _house(A[h, j + 1:, j].copy())
            if tau != 0.0:
                _house_left(A[h], j + 1, v, tau, j)
                _house_right(A[0], j + 1, v, tau)
                _house_right(Z[0], j + 1, v, tau)
            for i in range(j + 2, m):
                A[h, i, j] = 0.0


@njit(cache=True)
def _eig2(a, b, c, d):
    tr = 0.5 * (a + d)
    det = a * d - b * c
    disc = np.sqrt(tr * tr - det)
    return tr + disc, tr - disc


@njit(cache=True)
def _safe_log(x):
    return math.log(x) if x > 0.0 else -1e300


@njit(cache=True)
def _shift(A, lo, hi):
    """Shift for the window product as ``(mantissa, log scale)``.

    Candidates are the eigenvalues of the trailing 2x2 block of the product.
    When their magnitudes differ by more than three decades the one closest
    in log-magnitude to the current trailing diagonal product is taken,
    which keeps strongly graded products converging; otherwise the choice
    is the usual Wilkinson one.
    """
    p = A.shape[0]
    h = p - 1
    s = max(lo, hi - 2)
    b = hi - s + 1
    P = np.eye(b).astype(np.complex128)
    logscale = 0.0
    for a in range(p - 1):
        P = np.ascontiguousarray(A[a, s:hi + 1, s:hi + 1]) @ P
        nrm = np.max(np.abs(P))
        if nrm == 0.0:
            return 0.0 + 0.0j, 0.0
        P /= nrm
        logscale += math.log(nrm)
    M = np.ascontiguousarray(A[h, hi - 1:hi + 1, s:hi + 1]) @ np.ascontiguousarray(P[:, b - 2:])
    nrm = np.max(np.abs(M))
    if nrm == 0.0:
        return 0.0 + 0.0j, 0.0
    M /= nrm
    logscale += math.log(nrm)
    l1, l2 = _eig2(M[0, 0], M[0, 1], M[1, 0], M[1, 1])
    g1 = _safe_log(abs(l1))
    g2 = _safe_log(abs(l2))
    if abs(g1 - g2) > 6.9:
        target = _safe_log(abs(A[h, hi, hi]))
        for a in range(p - 1):
            target += _safe_log(abs(A[a, hi, hi]))
        target -= logscale
        if abs(g1 - target) < abs(g2 - target):
            return l1, logscale
        return l2, logscale
    if abs(l1 - M[1, 1]) < abs(l2 - M[1, 1]):
        return l1, logscale
    return l2, logscale


@njit(cache=True)
def _sweep(A, Zt, lo, hi, sig, logsig):
    p = A.shape[0]
    h = p - 1
    # first column of (product - sigma I) restricted to the window
    logpi = 0.0
    ph = 1.0 + 0.0j
    zero = False
    for a in range(p - 1):
        v = A[a, lo, lo]
        av = abs(v)
        if av == 0.0:
            zero = True
            break
        logpi += math.log(av)
        ph *= v / av
    if zero:
        x0 = -sig
        x1 = 0.0 + 0.0j
        if abs(x0) == 0.0:
            x0 = 1.0 + 0.0j
            x1 = 1.0 + 0.0j
    else:
        ref = max(logpi, logsig)
        fp = math.exp(logpi - ref)
        fs = math.exp(logsig - ref)
        x0 = A[h, lo, lo] * ph * fp - sig * fs
        x1 = A[h, lo + 1, lo] * ph * fp
    m = A.shape[1]
    c, s, r = _givens(x0, x1)
    _rot_rows(A[h], lo, lo + 1, c, s, lo)
    _rot_cols(A[0], lo, lo + 1, c, s, lo + 3)
    _rot_zt(Zt[0], lo, lo + 1, c, s)
    for k in range(lo, hi):
        for a in range(p - 1):
            c, s, r = _givens(A[a, k, k], A[a, k + 1, k])
            _rot_rows(A[a], k, k + 1, c, s, k)
            A[a, k + 1, k] = 0.0
            _rot_cols(A[a + 1], k, k + 1, c, s, k + 3)
            _rot_zt(Zt[a + 1], k, k + 1, c, s)
        if k + 2 <= hi:
            c, s, r = _givens(A[h, k + 1, k], A[h, k + 2, k])
            _rot_rows(A[h], k + 1, k + 2, c, s, k)
            A[h, k + 2, k] = 0.0
            _rot_cols(A[0], k + 1, k + 2, c, s, k + 4)
            _rot_zt(Zt[0], k + 1, k + 2, c, s)


@njit(cache=True)
def periodic_qr(A, Z, maxit):
    """Iterate to periodic Schur form; returns the number of sweeps or -1."""
    p, m, _ = A.shape
    h = p - 1
    hi = m - 1
    total = 0
    its = 0
    Zt = np.empty_like(Z)
    for a in range(p):
        Zt[a] = Z[a].T
    while hi > 0:
        # deflation scan of the Hessenberg factor
        lo = hi
        # equal product eigenvalues leave the subdiagonal at rounding level;
        # after a long stall accept a normwise test, still O(eps) backward error
        relaxed = its >= STALL_ITS
        wnorm = 0.0
        if relaxed:
            for i in range(hi + 1):
                for j in range(max(0, i - 1), hi + 1):
                    wnorm = max(wnorm, abs(A[h, i, j]))
        while lo > 0:
            sub = abs(A[h, lo, lo - 1])
            ref = abs(A[h, lo - 1, lo - 1]) + abs(A[h, lo, lo])
            if ref == 0.0:
                ref = np.max(np.abs(A[h]))
            if relaxed:
                ref = 16.0 * max(ref, wnorm)
            if sub <= EPS * ref:
                A[h, lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            its = 0
            continue
        if total >= maxit:
            for a in range(p):
                Z[a] = Zt[a].T
            return -1
        sig, logsig = _shift(A, lo, hi)
        its += 1
        if its % 7 == 0:
            # stagnation: an unshifted sweep, then an exceptional shift
            sig = 0.0 + 0.0j
        elif its % 11 == 0:
            sig = sig * (1.0 + 0.37j) + 0.5 * np.exp(1j * its)
        _sweep(A, Zt, lo, hi, sig, logsig)
        total += 1
    for a in range(p):
        Z[a] = Zt[a].T
    for k in range(1, m):
        for a in range(p):
            for i in range(k, m):
                if a < h or i > k:
                    A[a, i, k - 1] = 0.0
    return total


@njit(cache=True)
def cyclic_solve(al, be, c, forward):
    """Solve ``al[a] x[a] - be[a] x[(a+1) % p] = c[a]`` for a = 0..p-1."""
    p = al.shape[0]
    x = np.zeros(p, dtype=np.complex128)
    if forward:
        # x[a+1] = (al x[a] - c) / be ; x[a] = P x0 + Q
        P = 1.0 + 0.0j
        Q = 0.0 + 0.0j
        for a in range(p):
            P = al[a] * P / be[a]
            Q = (al[a] * Q - c[a]) / be[a]
        den = 1.0 - P
        if abs(den) < EPS * max(1.0, abs(P)):
            den = EPS * max(1.0, abs(P))
        x0 = Q / den
        x[0] = x0
        for a in range(p - 1):
            x[a + 1] = (al[a] * x[a] - c[a]) / be[a]
    else:
        # x[a] = (be x[a+1] + c) / al, sweeping down from x[p] = x[0]
        P = 1.0 + 0.0j
        Q = 0.0 + 0.0j
        for a in range(p - 1, -1, -1):
            P = be[a] * P / al[a]
            Q = (be[a] * Q + c[a]) / al[a]
        den = 1.0 - P
        if abs(den) < EPS * max(1.0, abs(P)):
            den = EPS * max(1.0, abs(P))
        x0 = Q / den
        x[0] = x0
        nxt = x0
        for a in range(p - 1, 0, -1):
            nxt = (be[a] * nxt + c[a]) / al[a]
            x[a] = nxt
    return x


@njit(cache=True)
def apply_swap(A, Z, k, x):
    """Rotate spaces so the eigenvalue at ``k+1`` moves to ``k``.

    ``x[a]`` is the first component of the eigenvector ``[x[a], 1]`` of the
    trailing eigenvalue in space ``a``. Returns the largest relative fill
    left below the diagonal, which the caller compares to its tolerance.
    """
    p = A.shape[0]
    cs = np.empty(p)
    ss = np.empty(p, dtype=np.complex128)
    for a in range(p):
        c, s, r = _givens(x[a], 1.0 + 0.0j)
        cs[a] = c
        ss[a] = s
    worst = 0.0
    for a in range(p):
        b = (a + 1) % p
        _rot_rows(A[a], k, k + 1, cs[b], ss[b])
        _rot_cols(A[a], k, k + 1, cs[a], ss[a])
    for a in range(p):
        _rot_cols(Z[a], k, k + 1, cs[a], ss[a])
    for a in range(p):
        nrm = np.max(np.abs(A[a, k:k + 2, k:k + 2]))
        if nrm > 0:
            worst = max(worst, abs(A[a, k + 1, k]) / nrm)
        A[a, k + 1, k] = 0.0
    return worst
