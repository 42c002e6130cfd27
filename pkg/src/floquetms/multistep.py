"""Variable-step BDF (Gear) coefficients, orders 1 through 4.

A d-step method at slice ``i`` combines the grid values at
``t_{i-d}, ..., t_i``::

    sum_j alpha_j x_{i-d+j} = dt_i * sum_j beta_j x'(t_{i-d+j})

with ``alpha_d = 1``. For BDF only ``beta_d`` is nonzero. The coefficients
are obtained by imposing exactness on all polynomials of degree <= d over the
local node offsets, normalised by ``dt_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStencil, InvalidArgument
from .grid import PeriodicGrid

SCHEME_NAMES = {"be": 1, "gear2": 2, "gear3": 3, "gear4": 4}


@dataclass(frozen=True)
class MultistepScheme:
    d: int
    family: str = "BDF"

    def __post_init__(self):
        if self.family != "BDF":
            raise InvalidArgument(f"unsupported family {self.family!r}")
        if int(self.d) != self.d or not 1 <= self.d <= 4:
            raise InvalidArgument(f"BDF step count must be 1..4, got {self.d!r}")

    @property
    def s(self) -> int:
        """Consistency order."""
        return self.d

    @property
    def name(self) -> str:
        return "be" if self.d == 1 else f"gear{self.d}"


def scheme(name: str) -> MultistepScheme:
    try:
        return MultistepScheme(SCHEME_NAMES[name.lower()])
    except KeyError:
        raise InvalidArgument(
            f"unknown scheme {name!r}; choose from {sorted(SCHEME_NAMES)}"
        ) from None


@dataclass(frozen=True)
class StepCoefficients:
    alpha: np.ndarray
    beta: np.ndarray
    slice: int = 0

    @property
    def d(self) -> int:
        return self.alpha.size - 1


def node_offsets(ratios) -> np.ndarray:
    """Offsets ``(t_{i-d+j} - t_i) / dt_i`` for j = 0..d.

    ``ratios`` is the chronological window ``(w_{i-d+2}, ..., w_i)`` of
    ``d - 1`` stepsize ratios.
    """
    ratios = np.asarray(ratios, dtype=float).ravel()
    d = ratios.size + 1
    h = np.empty(d)  # h[l] is the step ending at t_{i-l}, relative to dt_i
    h[0] = 1.0
    for l in range(1, d):
        h[l] = h[l - 1] / ratios[-l]
    tau = np.zeros(d + 1)
    tau[:d] = -np.cumsum(h)[::-1]
    return tau


def coefficients(sch: MultistepScheme, ratios=(), slice: int = 0) -> StepCoefficients:
    """Variable-step BDF coefficients for one slice."""
    d = sch.d
    ratios = np.asarray(ratios, dtype=float).ravel()
    if ratios.size != d - 1:
        raise InvalidArgument(f"{sch.name} needs {d - 1} ratios, got {ratios.size}")
    if np.any(~(ratios > 0)):
        raise InvalidArgument("stepsize ratios must be positive")
    tau = node_offsets(ratios)
    # unknowns (alpha_0..alpha_{d-1}, beta_d); one equation per monomial t^m
    m = np.arange(d + 1)[:, None]
    A = np.zeros((d + 1, d + 1))
    A[:, :d] = tau[None, :d] ** m
    A[1, d] = -1.0
    rhs = np.zeros(d + 1)
    rhs[0] = -1.0
    if np.linalg.cond(A) > 1e12:
        raise DegenerateStencil(f"order conditions singular for ratios {ratios.tolist()}")
    x = np.linalg.solve(A, rhs)
    alpha = np.append(x[:d], 1.0)
    beta = np.zeros(d + 1)
    beta[d] = x[d]
    return StepCoefficients(alpha, beta, slice)


def gear2_closed_form(omega: float) -> StepCoefficients:
    """Printed Gear2 formula; used as a cross-check of :func:`coefficients`."""
    a0 = omega ** 2 / (1 + 2 * omega)
    alpha = np.array([a0, -1 - a0, 1.0])
    beta = np.array([0.0, 0.0, (1 + omega) / (1 + 2 * omega)])
    return StepCoefficients(alpha, beta)


def ratio_window(grid: PeriodicGrid, i: int, d: int) -> np.ndarray:
    return np.array([grid.ratio(l) for l in range(i - d + 2, i + 1)])


def coefficients_at(sch: MultistepScheme, grid: PeriodicGrid, i: int) -> StepCoefficients:
    return coefficients(sch, ratio_window(grid, i, sch.d), slice=i)


def period_coefficients(sch: MultistepScheme, grid: PeriodicGrid) -> list:
    """Coefficients for slices 1..p (list index ``i - 1``)."""
    return [coefficients_at(sch, grid, i) for i in range(1, grid.p + 1)]


def consistency_residual(coeffs: StepCoefficients, nodes, q: int) -> float:
    """Largest order-condition defect over monomials of degree <= q.

    ``nodes`` are the d+1 local times ``t_{i-d}..t_i``; they are shifted to
    ``t_i`` and scaled by the last step before evaluation.
    """
    if q < 0:
        raise InvalidArgument("q must be >= 0")
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size != coeffs.alpha.size:
        raise InvalidArgument("need d+1 nodes")
    tau = (nodes - nodes[-1]) / (nodes[-1] - nodes[-2])
    worst = 0.0
    for m in range(q + 1):
        lhs = np.dot(coeffs.alpha, tau ** m)
        if m > 0:
            lhs -= m * np.dot(coeffs.beta, tau ** (m - 1))
        worst = max(worst, abs(lhs))
    return worst


def stability_companion(coeffs_seq) -> list:
    """Scalar companion matrices ``F_{i,i-1}`` of the test equation x' = 0."""
    out = []
    for c in coeffs_seq:
        d = c.d
        F = np.zeros((d, d))
        F[:-1, 1:] = np.eye(d - 1)
        F[-1, :] = -c.alpha[:d]
        out.append(F)
    return out
