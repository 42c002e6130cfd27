"""Semi-explicit index-1 DAEs reduced to sampled LPTV systems.

With ``C = [[C11, 0], [0, 0]]`` the adjoint system
``-C^T y' + G^T y = 0`` splits into::

    y1' = C11^{-T} (G11^T - G21^T G22^{-T} G12^T) y1
    y2  = -G22^{-T} G12^T y1

The Schur complement is never formed. Each reduced apply costs one
``G22`` solve, one ``C11`` solve and three sparse matvecs, and the
multistep shifted solves go through an augmented sparse system of size
``n1 + n2``. The non-transposed form ``C x' = G x`` is available as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IllPosedStep, IndexViolation, InvalidArgument
from .grid import PeriodicGrid
from .lptv import PIVOT_RATIO, ImplicitSample, SampledLptvSystem


def _csc(a) -> sp.csc_matrix:
    return sp.csc_matrix(a, dtype=float)


def _split_complex(solve: Callable) -> Callable:
    def wrapped(b):
        if np.iscomplexobj(b):
            return solve(np.ascontiguousarray(b.real)) + 1j * solve(np.ascontiguousarray(b.imag))
        return solve(b)
    return wrapped


def _lu(A: sp.csc_matrix):
    """Sparse LU with the same pivot-ratio test as the ODE path, or ``None``."""
    if A.shape[0] == 0:
        return lambda b: b
    try:
        lu = spla.splu(A)
    except RuntimeError:
        return None
    piv = np.abs(lu.U.diagonal())
    if piv.max() == 0 or piv.min() < PIVOT_RATIO * piv.max():
        return None
    return _split_complex(lu.solve)


@dataclass
class DaeBlocks:
    """Blocks of one slice, already transposed when the adjoint form is used."""

    C11: sp.csc_matrix
    G11: sp.csc_matrix
    G12: sp.csc_matrix
    G21: sp.csc_matrix
    G22: sp.csc_matrix


class SampledDaeSystem:
    """Per-slice blocks of ``C(t)`` and ``G(t)`` on a periodic grid.

    ``blocks[i - 1]`` belongs to ``t_i``. Factorizations of ``C11`` and
    ``G22`` are attempted at construction so singular slices fail early.
    """

    def __init__(self, grid: PeriodicGrid, C11: Sequence, G11: Sequence, G12: Sequence,
                 G21: Sequence, G22: Sequence):
        lists = [list(x) for x in (C11, G11, G12, G21, G22)]
        if any(len(x) != grid.p for x in lists):
            raise InvalidArgument(f"every block list needs {grid.p} entries")
        self.grid = grid
        self.blocks = [DaeBlocks(*(_csc(x[i]) for x in lists)) for i in range(grid.p)]
        b0 = self.blocks[0]
        self.n1, self.n2 = b0.C11.shape[0], b0.G22.shape[0]
        for i, b in enumerate(self.blocks, start=1):
            shapes = (b.C11.shape, b.G11.shape, b.G12.shape, b.G21.shape, b.G22.shape)
            want = ((self.n1, self.n1), (self.n1, self.n1), (self.n1, self.n2),
                    (self.n2, self.n1), (self.n2, self.n2))
            if shapes != want:
                raise InvalidArgument(f"block shapes at slice {i} are {shapes}, expected {want}")
        self._c11 = [self._factor(b.C11, i, "C11") for i, b in enumerate(self.blocks, 1)]
        self._g22 = [self._factor(b.G22, i, "G22") for i, b in enumerate(self.blocks, 1)]

    @staticmethod
    def _factor(A, i, name):
        lu = _lu(A)
        if lu is None:
            raise IndexViolation(i, name)
        return lu

    @classmethod
    def from_full(cls, grid: PeriodicGrid, C: Sequence, G: Sequence, differential: Sequence[int]):
        """Split full ``C``, ``G`` samples with an explicit differential index set.

        The off-differential part of ``C`` must be exactly zero.
        """
        diff = np.asarray(sorted(set(int(j) for j in differential)), dtype=int)
        C, G = list(C), list(G)
        if len(C) != grid.p or len(G) != grid.p:
            raise InvalidArgument(f"need {grid.p} C and G samples")
        n = _csc(C[0]).shape[0]
        if diff.size == 0 or diff.min() < 0 or diff.max() >= n:
            raise InvalidArgument("differential indices out of range")
        alg = np.setdiff1d(np.arange(n), diff)
        parts = [[], [], [], [], []]
        for i, (c, g) in enumerate(zip(C, G), start=1):
            c, g = _csc(c), _csc(g)
            if c.shape != (n, n) or g.shape != (n, n):
                raise InvalidArgument(f"C and G at slice {i} must be {n}x{n}")
            rest = c.copy().tolil()
            rest[np.ix_(diff, diff)] = 0
            if _csc(rest).count_nonzero():
                raise InvalidArgument(f"C at slice {i} is nonzero outside the differential block")
            parts[0].append(c[diff][:, diff])
            parts[1].append(g[diff][:, diff])
            parts[2].append(g[diff][:, alg])
            parts[3].append(g[alg][:, diff])
            parts[4].append(g[alg][:, alg])
        sys = cls(grid, *parts)
        sys.differential, sys.algebraic = diff, alg
        return sys

    @property
    def p(self) -> int:
        return self.grid.p

    def block(self, i: int) -> DaeBlocks:
        return self.blocks[(int(i) - 1) % self.p]

    def solve_c11(self, i: int) -> Callable:
        return self._c11[(int(i) - 1) % self.p]

    def solve_g22(self, i: int) -> Callable:
        return self._g22[(int(i) - 1) % self.p]


class ReducedSample(ImplicitSample):
    """Implicit Schur-complement operator of one slice.

    ``matvec`` applies ``M = C11^{-T}(G11^T - G21^T G22^{-T} G12^T)`` (or
    ``C11^{-1}(G11 - G12 G22^{-1} G21)`` without transposition).
    """

    def __init__(self, blocks: DaeBlocks, slice_index: int, transpose: bool = True):
        self.slice_index = slice_index
        self.transpose = transpose
        if transpose:
            self._C11, self._G11 = blocks.C11.T.tocsc(), blocks.G11.T.tocsc()
            # roles swap: G21^T multiplies the algebraic unknowns
            self._up, self._low = blocks.G21.T.tocsc(), blocks.G12.T.tocsc()
            self._G22 = blocks.G22.T.tocsc()
        else:
            self._C11, self._G11 = blocks.C11, blocks.G11
            self._up, self._low, self._G22 = blocks.G12, blocks.G21, blocks.G22
        self.n = self._C11.shape[0]
        self.n2 = self._G22.shape[0]
        self._c11 = _lu(self._C11)
        self._g22 = _lu(self._G22)
        if self._c11 is None:
            raise IndexViolation(slice_index, "C11")
        if self._g22 is None:
            raise IndexViolation(slice_index, "G22")
        self.n_solves = 0
        self.n_matvecs = 0

    def algebraic(self, y1: np.ndarray) -> np.ndarray:
        """``y2 = -G22^{-1} (low) y1`` for the working (possibly transposed) blocks."""
        self.n_solves += 1
        self.n_matvecs += 1
        return -self._g22(self._low @ y1)

    def matvec(self, v):
        v = np.asarray(v)
        z = -self.algebraic(v)
        r = self._G11 @ v - self._up @ z
        self.n_matvecs += 2
        self.n_solves += 1
        return self._c11(r)

    def shift_solver(self, c: float) -> Callable:
        """Solve ``(I - c M) x = b`` through the augmented block system.

        With ``z = G22^{-1} (low) x`` the equation becomes
        ``[[C11 - c G11, c up], [low, -G22]] [x; z] = [C11 b; 0]``.
        """
        n, n2 = self.n, self.n2
        K = sp.bmat([[self._C11 - c * self._G11, c * self._up],
                     [self._low, -self._G22]], format="csc")
        lu = _lu(K)
        if lu is None:
            raise IllPosedStep(self.slice_index)
        C11 = self._C11

        def solve(b):
            b = np.asarray(b)
            top = C11 @ b
            rhs = np.concatenate([top, np.zeros((n2,) + top.shape[1:], dtype=top.dtype)], axis=0)
            return lu(rhs)[:n]
        return solve

    def dense_schur(self) -> np.ndarray:
        """Explicit reduced matrix (oracle, small sizes only)."""
        C11, G11 = self._C11.toarray(), self._G11.toarray()
        up, low, G22 = self._up.toarray(), self._low.toarray(), self._G22.toarray()
        return np.linalg.solve(C11, G11 - up @ np.linalg.solve(G22, low))


def decouple(sys: SampledDaeSystem, transpose: bool = True) -> SampledLptvSystem:
    """Reduced ODE as a sampled LPTV system with implicit samples."""
    samples = [ReducedSample(sys.block(i), i, transpose) for i in range(1, sys.p + 1)]
    return SampledLptvSystem(sys.grid, samples)


def recover_algebraic(sys: SampledDaeSystem, i: int, y1, transpose: bool = True) -> np.ndarray:
    """Algebraic variables at slice ``i`` from the differential ones.

    ``y2 = -G22^{-T} G12^T y1`` in adjoint form, ``-G22^{-1} G21 y1`` otherwise.
    """
    y1 = np.asarray(y1)
    if y1.shape[0] != sys.n1:
        raise InvalidArgument(f"y1 must have length {sys.n1}, got {y1.shape[0]}")
    b = sys.block(i)
    if transpose:
        lu = _lu(b.G22.T.tocsc())
        if lu is None:
            raise IndexViolation(i, "G22")
        return -lu(b.G12.T @ y1)
    return -sys.solve_g22(i)(b.G21 @ y1)


def algebraic_residual(sys: SampledDaeSystem, i: int, y1, y2, transpose: bool = True) -> float:
    """Relative residual of the algebraic rows at slice ``i``."""
    b = sys.block(i)
    if transpose:
        A, B = b.G12.T, b.G22.T
    else:
        A, B = b.G21, b.G22
    u, w = A @ y1, B @ y2
    scale = np.linalg.norm(u) + np.linalg.norm(w)
    return 0.0 if scale == 0 else float(np.linalg.norm(u + w) / scale)


def embed_core(core: SampledLptvSystem, n2: int = 3, seed: int = 0,
               transpose: bool = True, density: float = 0.6) -> SampledDaeSystem:
    """Index-1 DAE whose reduced operator reproduces ``core`` slice by slice.

    Random well-conditioned ``C11``, ``G12``, ``G21`` and ``G22`` are drawn per
    slice and ``G11`` is chosen so that the Schur complement equals the
    core samples: ``G11 = A^T C11 + G12 G22^{-1} G21`` in adjoint form.
    """
    rng = np.random.default_rng(seed)
    n1 = core.n
    lists = [[], [], [], [], []]
    for i in range(1, core.p + 1):
        A = core.dense_sample(i)
        C11 = np.eye(n1) + 0.3 * rng.standard_normal((n1, n1))
        G22 = np.eye(n2) * 2.0 + 0.3 * rng.standard_normal((n2, n2))
        G12 = rng.standard_normal((n1, n2)) * (rng.random((n1, n2)) < density)
        G21 = rng.standard_normal((n2, n1)) * (rng.random((n2, n1)) < density)
        if transpose:
            G11 = A.T @ C11 + G12 @ np.linalg.solve(G22, G21)
        else:
            G11 = C11 @ A + G12 @ np.linalg.solve(G22, G21)
        for lst, blk in zip(lists, (C11, G11, G12, G21, G22)):
            lst.append(blk)
    return SampledDaeSystem(core.grid, *lists)


def assemble_full(sys: SampledDaeSystem, i: int) -> tuple:
    """Full ``(C, G)`` of slice ``i`` with the differential block first."""
    b = sys.block(i)
    C = sp.block_diag([b.C11, sp.csc_matrix((sys.n2, sys.n2))], format="csc")
    G = sp.bmat([[b.G11, b.G12], [b.G21, b.G22]], format="csc")
    return C, G
