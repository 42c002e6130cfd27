"""Sampled LPTV systems and the implicit companion operators of a multistep
discretization.

For slice ``i`` the d-step recursion reads::

    x_i = sum_j A_j^{(i)} x_{i-d+j},
    A_j^{(i)} = -(I - beta_d dt_i G^{(i)})^{-1} (alpha_j I - beta_j dt_i G^{(i-d+j)})

and the companion map ``L^{(i)}`` sends the stacked state
``(x_{i-d}, ..., x_{i-1})`` to ``(x_{i-d+1}, ..., x_i)``. Only the last block
is new, so one application costs one shifted solve plus at most ``d``
matvecs with samples of ``G``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IllPosedStep, InvalidArgument
from .grid import PeriodicGrid
from .multistep import MultistepScheme, StepCoefficients, period_coefficients

PIVOT_RATIO = 1e-14
DENSE_LIMIT = 2000


class ImplicitSample:
    """Interface for samples known only through their action.

    Subclasses provide ``n``, ``matvec(v)`` and ``shift_solver(c)``; the
    latter returns a callable solving ``(I - c M) x = b``.
    """

    n: int

    def matvec(self, v):  # pragma: no cover - interface
        raise NotImplementedError

    def shift_solver(self, c: float) -> Callable:  # pragma: no cover
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        return np.column_stack([self.matvec(e) for e in np.eye(self.n)])


def _dim(g) -> int:
    if isinstance(g, ImplicitSample):
        return g.n
    shape = g.shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise InvalidArgument(f"samples must be square, got shape {shape}")
    return shape[0]


class SampledLptvSystem:
    """``p`` samples ``G^{(1)}..G^{(p)}`` on a periodic grid.

    ``samples[i - 1]`` is ``G(t_i)``, so the last sample is ``G(T) = G(0)``.
    Samples may be dense arrays, scipy sparse matrices or
    :class:`ImplicitSample` objects.
    """

    def __init__(self, grid: PeriodicGrid, samples: Sequence):
        samples = list(samples)
        if len(samples) != grid.p:
            raise InvalidArgument(f"expected {grid.p} samples, got {len(samples)}")
        dims = {_dim(g) for g in samples}
        if len(dims) != 1:
            raise InvalidArgument(f"samples disagree in dimension: {sorted(dims)}")
        conv = []
        for g in samples:
            if isinstance(g, ImplicitSample):
                conv.append(g)
            elif sp.issparse(g):
                conv.append(sp.csc_matrix(g, dtype=float))
            else:
                conv.append(np.array(g, dtype=float))
        self.grid = grid
        self.samples = conv
        self.n = dims.pop()

    @classmethod
    def from_callback(cls, grid: PeriodicGrid, fn: Callable[[float], np.ndarray]):
        """Evaluate ``fn`` at ``t_1..t_p``."""
        return cls(grid, [fn(grid.time(i)) for i in range(1, grid.p + 1)])

    @property
    def p(self) -> int:
        return self.grid.p

    def sample(self, i: int):
        """``G^{(i)}`` with cyclic indexing."""
        return self.samples[(int(i) - 1) % self.p]

    def dense_sample(self, i: int) -> np.ndarray:
        g = self.sample(i)
        if isinstance(g, ImplicitSample):
            return g.to_dense()
        return g.toarray() if sp.issparse(g) else g


def _apply(g, v):
    return g.matvec(v) if isinstance(g, ImplicitSample) else g @ v


def _complex_safe(solve: Callable) -> Callable:
    # real factorizations applied to complex right-hand sides
    def wrapped(b):
        if np.iscomplexobj(b):
            return solve(b.real) + 1j * solve(b.imag)
        return solve(b)
    return wrapped


def _factorize(g, c: float, n: int, slice_index: int) -> Callable:
    """Solver for ``(I - c g) x = b`` with a pivot-ratio singularity check."""
    return _complex_safe(_factorize_real(g, c, n, slice_index))


def _factorize_real(g, c: float, n: int, slice_index: int) -> Callable:
    if isinstance(g, ImplicitSample):
        try:
            return g.shift_solver(c)
        except (RuntimeError, np.linalg.LinAlgError, ZeroDivisionError) as exc:
            raise IllPosedStep(slice_index) from exc
    if sp.issparse(g):
        S = (sp.identity(n, format="csc") - c * g).tocsc()
        try:
            lu = spla.splu(S)
        except RuntimeError as exc:
            raise IllPosedStep(slice_index) from exc
        piv = np.abs(lu.U.diagonal())
        if piv.min() < PIVOT_RATIO * piv.max():
            raise IllPosedStep(slice_index)
        return lu.solve
    S = np.eye(n) - c * g
    with warnings.catch_warnings():
        # exact singularity is reported below through the pivot test
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, perm = sla.lu_factor(S, check_finite=True)
    piv = np.abs(np.diag(lu))
    if piv.max() == 0 or piv.min() < PIVOT_RATIO * piv.max():
        raise IllPosedStep(slice_index)
    return lambda b: sla.lu_solve((lu, perm), b, check_finite=False)


@dataclass
class SliceOperators:
    """Cached data of one slice: coefficients, shifted solver and samples."""

    slice: int
    coeffs: StepCoefficients
    dt: float
    solve: Callable
    window: list  # G^{(i-d+j)} for j = 0..d

    def apply_coefficient(self, j: int, v: np.ndarray) -> np.ndarray:
        """``A_j^{(i)} v`` for j = 0..d-1 (uncounted; for checks)."""
        a, b = self.coeffs.alpha[j], self.coeffs.beta[j]
        rhs = a * v
        if b != 0:
            rhs = rhs - b * self.dt * _apply(self.window[j], v)
        return -self.solve(rhs)


class CompanionOperator:
    """Implicit companion maps ``L^{(1)}..L^{(p)}`` with work counters."""

    def __init__(self, system: SampledLptvSystem, sch: MultistepScheme,
                 slices: list):
        self.system = system
        self.scheme = sch
        self.slices = slices
        self.n = system.n
        self.d = sch.d
        self.p = system.p
        self.n_solves = 0
        self.n_matvecs = 0

    @property
    def size(self) -> int:
        return self.n * self.d

    def reset_counters(self):
        self.n_solves = 0
        self.n_matvecs = 0

    def slice_ops(self, i: int) -> SliceOperators:
        return self.slices[(int(i) - 1) % self.p]

    def last_block(self, i: int, blocks: Sequence[np.ndarray]) -> np.ndarray:
        """New block ``x_i`` from the ``d`` previous blocks (oldest first)."""
        so = self.slice_ops(i)
        if len(blocks) != self.d:
            raise InvalidArgument(f"need {self.d} blocks, got {len(blocks)}")
        rhs = None
        for j, v in enumerate(blocks):
            term = -so.coeffs.alpha[j] * v
            bj = so.coeffs.beta[j]
            if bj != 0:
                term = term + bj * so.dt * _apply(so.window[j], v)
                self.n_matvecs += 1 if v.ndim == 1 else v.shape[1]
            rhs = term if rhs is None else rhs + term
        self.n_solves += 1 if rhs.ndim == 1 else rhs.shape[1]
        return so.solve(rhs)

    def apply(self, i: int, v: np.ndarray) -> np.ndarray:
        """``L^{(i)} v`` for a stacked vector or a block of columns."""
        v = np.asarray(v)
        if v.shape[0] != self.size:
            raise InvalidArgument(
                f"stacked vector must have length {self.size}, got {v.shape[0]}"
            )
        n, d = self.n, self.d
        blocks = [v[j * n:(j + 1) * n] for j in range(d)]
        new = self.last_block(i, blocks)
        return np.concatenate(blocks[1:] + [new], axis=0)


def assemble(system: SampledLptvSystem, sch: MultistepScheme) -> CompanionOperator:
    """Factorize the shifted matrices of every slice once."""
    grid = system.grid
    d = sch.d
    coeffs = period_coefficients(sch, grid)
    slices = []
    for i in range(1, grid.p + 1):
        c = coeffs[i - 1]
        dt = grid.step(i)
        solve = _factorize(system.sample(i), c.beta[d] * dt, system.n, i)
        window = [system.sample(i - d + j) for j in range(d + 1)]
        slices.append(SliceOperators(i, c, dt, solve, window))
    return CompanionOperator(system, sch, slices)


def companion_apply(op: CompanionOperator, i: int, v: np.ndarray) -> np.ndarray:
    return op.apply(i, v)


def dense_companion(op: CompanionOperator, i: int) -> np.ndarray:
    """Dense ``L^{(i)}`` assembled from the coefficient formula (oracle)."""
    n, d = op.n, op.d
    so = op.slice_ops(i)
    L = np.zeros((n * d, n * d))
    L[: n * (d - 1), n:] = np.eye(n * (d - 1))
    G = [op.system.dense_sample(i - d + j) for j in range(d + 1)]
    S = np.eye(n) - so.coeffs.beta[d] * so.dt * G[d]
    for j in range(d):
        Aj = -np.linalg.solve(S, so.coeffs.alpha[j] * np.eye(n)
                              - so.coeffs.beta[j] * so.dt * G[j])
        L[n * (d - 1):, j * n:(j + 1) * n] = Aj
    return L


def companion_sequence(op: CompanionOperator) -> list:
    """``[L^{(1)}, ..., L^{(p)}]`` formed by applying the operator to I."""
    if op.size > DENSE_LIMIT:
        raise InvalidArgument(
            f"n*d = {op.size} exceeds the dense limit {DENSE_LIMIT}; use ptoar"
        )
    eye = np.eye(op.size)
    return [op.apply(i, eye) for i in range(1, op.p + 1)]


def stm_dense(op: CompanionOperator, start: int = 0, length: int | None = None) -> np.ndarray:
    """Discrete STM ``F_{start+length, start} = L^{(start+length)}...L^{(start+1)}``."""
    if length is None:
        length = op.p
    if length < 0:
        raise InvalidArgument("length must be >= 0")
    if op.size > DENSE_LIMIT:
        raise InvalidArgument(
            f"n*d = {op.size} exceeds the dense limit {DENSE_LIMIT}; use ptoar"
        )
    F = np.eye(op.size)
    for i in range(start + 1, start + length + 1):
        F = op.apply(i, F)
    return F
