"""Periodic Schur decomposition of a cyclic matrix product.

Given ``L^{(1)}, ..., L^{(p)}`` we compute unitary ``Z^{(0)}..Z^{(p-1)}``
with::

    Z^{(i mod p)H} L^{(i)} Z^{(i-1)} = R^{(i)}     (upper triangular)

so the eigenvalues of ``L^{(p)} ... L^{(1)}`` are the products of the
diagonals, accumulated without ever forming the product. The iteration is a
complex single-shift periodic QR; see :mod:`floquetms._pqr` for the kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _pqr
from .errors import InvalidArgument, IterationLimit, ReorderFailure
from .escale import ExponentScaledValue, sort_key

SWAP_TOL = 1e-8


@dataclass
class PeriodicSchurForm:
    """Result of :func:`periodic_schur`.

    Attributes
    ----------
    Z : ndarray, shape (p, m, m)
        ``Z[a]`` is the unitary factor ``Z^{(a)}`` of coordinate space ``a``.
    R : ndarray, shape (p, m, m)
        ``R[a]`` is the triangular factor ``R^{(a+1)}``.
    sweeps : int
        Number of periodic QR sweeps used.
    """

    Z: np.ndarray
    R: np.ndarray
    sweeps: int = 0

    @property
    def p(self) -> int:
        return self.R.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[1]

    @property
    def eigenvalues(self) -> list:
        """Product eigenvalues in diagonal order."""
        diag = np.diagonal(self.R, axis1=1, axis2=2)  # (p, m)
        return [ExponentScaledValue.product(diag[:, j]) for j in range(self.m)]

    def log2_magnitudes(self) -> np.ndarray:
        diag = np.abs(np.diagonal(self.R, axis1=1, axis2=2))
        with np.errstate(divide="ignore"):
            return np.log2(diag).sum(axis=0)

    def copy(self) -> "PeriodicSchurForm":
        return PeriodicSchurForm(self.Z.copy(), self.R.copy(), self.sweeps)

    def relation_residuals(self, seq: Sequence[np.ndarray]) -> np.ndarray:
        """``||Z^{(a+1)H} L^{(a+1)} Z^{(a)} - R^{(a+1)}|| / ||L^{(a+1)}||`` per slice."""
        p = self.p
        out = np.empty(p)
        for a in range(p):
            L = np.asarray(seq[a])
            D = self.Z[(a + 1) % p].conj().T @ L @ self.Z[a] - self.R[a]
            out[a] = np.linalg.norm(D) / max(np.linalg.norm(L), np.finfo(float).tiny)
        return out


def _stack(seq) -> np.ndarray:
    mats = [np.asarray(L) for L in seq]
    if not mats:
        raise InvalidArgument("empty matrix sequence")
    m = mats[0].shape[0]
    for L in mats:
        if L.ndim != 2 or L.shape != (m, m):
            raise InvalidArgument("all matrices must be square with equal size")
    A = np.array(mats, dtype=np.complex128)
    if not np.all(np.isfinite(A)):
        raise InvalidArgument("matrices must be finite")
    return A


def periodic_schur(seq: Sequence[np.ndarray], max_sweeps: int | None = None) -> PeriodicSchurForm:
    """Periodic Schur form of ``seq = [L^{(1)}, ..., L^{(p)}]``.

    Raises
    ------
    IterationLimit
        If the iteration needs more than ``30 m`` sweeps (or ``max_sweeps``).
    """
    A = _stack(seq)
    p, m, _ = A.shape
    Z = np.broadcast_to(np.eye(m, dtype=np.complex128), (p, m, m)).copy()
    if m > 1:
        _pqr.hess_triangular(A, Z)
        limit = 30 * m if max_sweeps is None else int(max_sweeps)
        sweeps = _pqr.periodic_qr(A, Z, limit)
        if sweeps < 0:
            raise IterationLimit(
                f"periodic QR did not converge in {limit} sweeps",
                best=PeriodicSchurForm(Z, A, limit),
            )
    else:
        sweeps = 0
    return PeriodicSchurForm(Z, A, sweeps)


def product_eigvals(seq: Sequence[np.ndarray]) -> list:
    """Eigenvalues of the cyclic product, sorted by descending magnitude."""
    return sorted(periodic_schur(seq).eigenvalues, key=sort_key)


def _cyclic_solve(al, be, c, forward: bool) -> np.ndarray:
    x = _pqr.cyclic_solve(al, be, c, forward)
    if np.all(np.isfinite(x)):
        return x
    # scaling trouble in the recurrence; fall back to a pivoted sparse solve
    p = al.size
    rows = np.arange(p)
    M = sp.csc_matrix(
        (np.concatenate([al, -be]),
         (np.concatenate([rows, rows]), np.concatenate([rows, (rows + 1) % p]))),
        shape=(p, p),
    )
    if p == 1:
        M = sp.csc_matrix(np.array([[al[0] - be[0]]]))
    return spla.spsolve(M, c.astype(complex))


def _swap(form: PeriodicSchurForm, k: int) -> None:
    """Exchange the eigenvalues at diagonal positions ``k`` and ``k + 1``."""
    R = form.R
    al = R[:, k, k].copy()
    be = R[:, k + 1, k + 1].copy()
    c = -R[:, k, k + 1]
    with np.errstate(divide="ignore"):
        forward = np.log(np.abs(al)).sum() < np.log(np.abs(be)).sum()
    x = _cyclic_solve(al, be, c, bool(forward))
    if not np.all(np.isfinite(x)):
        raise ReorderFailure(f"swap at position {k} has no finite solution")
    worst = _pqr.apply_swap(R, form.Z, k, x)
    if worst > SWAP_TOL:
        raise ReorderFailure(
            f"swap at position {k} leaves relative fill {worst:.2e} > {SWAP_TOL:g}"
        )


def reorder(form: PeriodicSchurForm, select) -> PeriodicSchurForm:
    """Move selected eigenvalues to the leading diagonal positions.

    ``select`` is a predicate on :class:`ExponentScaledValue`, a boolean mask
    or a collection of positions. Relative order inside the selected and
    unselected groups is preserved. The input form is not modified.
    """
    m = form.m
    eigs = form.eigenvalues
    if callable(select):
        mask = np.array([bool(select(v)) for v in eigs], dtype=bool)
    else:
        sel = np.asarray(list(select) if not isinstance(select, np.ndarray) else select)
        if sel.dtype == bool:
            if sel.size != m:
                raise InvalidArgument("mask length must equal the matrix size")
            mask = sel.copy()
        else:
            mask = np.zeros(m, dtype=bool)
            mask[sel.astype(int)] = True
    out = form.copy()
    slot = 0
    for j in range(m):
        if not mask[j]:
            continue
        for k in range(j - 1, slot - 1, -1):
            _swap(out, k)
        slot += 1
    return out


def sort_leading(form: PeriodicSchurForm, count: int | None = None) -> PeriodicSchurForm:
    """Put the ``count`` largest-magnitude eigenvalues first, descending."""
    m = form.m
    count = m if count is None else min(int(count), m)
    out = form.copy()
    for t in range(count):
        mags = out.log2_magnitudes()
        j = t + int(np.argmax(mags[t:]))
        if not mags[j] > mags[t]:
            continue
        for k in range(j - 1, t - 1, -1):
            _swap(out, k)
    return out


def periodic_eigenvector(form: PeriodicSchurForm, j: int) -> np.ndarray:
    """Eigenvectors of the cyclic product for diagonal position ``j``.

    Returns ``X`` of shape (p, m) with ``L^{(a+1)} X[a] = R[a][j, j] X[a+1]``,
    so ``X[0]`` is an eigenvector of ``L^{(p)}...L^{(1)}`` and ``X[a]`` of
    the product started at slice ``a``.
    """
    R = form.R
    p, m, _ = R.shape
    if not 0 <= j < m:
        raise InvalidArgument(f"position {j} out of range")
    Y = np.zeros((p, m), dtype=complex)
    Y[:, j] = 1.0
    be = R[:, j, j].copy()
    mags = form.log2_magnitudes()
    for l in range(j - 1, -1, -1):
        c = -np.einsum("am,am->a", R[:, l, l + 1:j + 1], Y[:, l + 1:j + 1])
        al = R[:, l, l].copy()
        Y[:, l] = _cyclic_solve(al, be, c, bool(mags[l] < mags[j]))
    return np.einsum("aij,aj->ai", form.Z, Y)


def explicit_product(seq: Sequence[np.ndarray]) -> np.ndarray:
    """``L^{(p)} ... L^{(1)}`` formed explicitly (oracle use only)."""
    P = np.eye(np.asarray(seq[0]).shape[0], dtype=complex)
    for L in seq:
        P = np.asarray(L) @ P
    return P
