"""Benchmark systems and convergence studies.

Rotating-frame systems ``G(t) = S + R(t) M R(t)^T`` with ``R(t) = expm(S t)``
have the closed-form transition matrix ``Phi(t, 0) = R(t) expm(M t)``. With
``S`` skew-symmetric and integer frequencies ``R`` is ``2 pi``-periodic, so
the multipliers are the eigenvalues of ``expm(2 pi M)`` and the Floquet
eigenvectors at time ``t`` are ``R(t)`` times those at ``0``. The linearized
Stuart-Landau toy model is the case ``S = [[0, 1], [-1, 0]]``,
``M = diag(alpha, beta - 2)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import FloquetError, InvalidArgument, OrbitNotFound
from .escale import ExponentScaledValue
from .floquet import eig_error, solve, subspace_angle, vec_error
from .grid import PeriodicGrid, build_pattern, build_uniform
from .lptv import SampledLptvSystem
from .multistep import scheme as scheme_by_name
from .spurious import SPURIOUS

log = logging.getLogger(__name__)
TWO_PI = 2.0 * math.pi


@dataclass
class ExactFloquet:
    """Closed-form Floquet data of a rotating-frame system."""

    S: np.ndarray
    M: np.ndarray
    multipliers: list  # ExponentScaledValue, descending magnitude
    vectors0: np.ndarray  # columns: eigenvectors at t = 0, same order
    period: float = TWO_PI

    def rotation(self, t: float) -> np.ndarray:
        return sla.expm(self.S * t)

    def eigenvector(self, j: int, t: float) -> np.ndarray:
        return self.rotation(t) @ self.vectors0[:, j]

    def subspace(self, k: int, t: float = 0.0) -> np.ndarray:
        return self.rotation(t) @ self.vectors0[:, :k]

    def G(self, t: float) -> np.ndarray:
        R = self.rotation(t)
        return self.S + R @ self.M @ R.T


def rotating_frame(S: np.ndarray, M: np.ndarray) -> ExactFloquet:
    """Exact record for ``G(t) = S + R(t) M R(t)^T``.

    ``S`` must be skew-symmetric with ``expm(2 pi S) = I``.
    """
    S = np.asarray(S, dtype=float)
    M = np.asarray(M, dtype=float)
    if not np.allclose(S, -S.T, atol=1e-14):
        raise InvalidArgument("S must be skew-symmetric")
    if not np.allclose(sla.expm(TWO_PI * S), np.eye(S.shape[0]), atol=1e-10):
        raise InvalidArgument("expm(2*pi*S) must be the identity (integer frequencies)")
    w, V = np.linalg.eig(sla.expm(TWO_PI * M))
    order = np.argsort(-np.abs(w), kind="stable")
    mults = [ExponentScaledValue.from_complex(w[i]) for i in order]
    return ExactFloquet(S, M, mults, V[:, order])


def sample(exact: ExactFloquet, grid: PeriodicGrid) -> SampledLptvSystem:
    if abs(grid.period - exact.period) > 1e-12 * exact.period:
        raise InvalidArgument(f"grid period must be 2*pi, got {grid.period!r}")
    return SampledLptvSystem.from_callback(grid, exact.G)


def stuart_landau_exact(alpha: float, beta: float) -> ExactFloquet:
    S = np.array([[0.0, 1.0], [-1.0, 0.0]])
    M = np.diag([alpha, beta - 2.0])
    return rotating_frame(S, M)


def stuart_landau(alpha: float, beta: float, grid: PeriodicGrid):
    """Linearized Stuart-Landau toy system sampled on ``grid``.

    Returns ``(system, exact)``; ``exact.eigenvector(j, t)`` gives column
    ``j`` of ``[[cos t, sin t], [-sin t, cos t]]``.
    """
    exact = stuart_landau_exact(alpha, beta)
    return sample(exact, grid), exact


def toy_matrix(alpha: float, beta: float, t: float) -> np.ndarray:
    """The toy matrix written out entrywise (cross-check of the frame form)."""
    c, s = math.cos(t), math.sin(t)
    return np.array([
        [alpha * c * c + (beta - 2) * s * s, 1 + (beta - alpha - 2) * s * c],
        [-1 + (beta - alpha - 2) * s * c, alpha * s * s + (beta - 2) * c * c],
    ])


def clustered_system(cluster: Sequence[float] = (1.0, 1.0 + 5e-5, 1.0 - 5e-5),
                     rest: Sequence[float] = (0.98, 0.5), seed: int = 3) -> ExactFloquet:
    """Rotating-frame system with prescribed real positive multipliers.

    A random orthogonal change of basis couples every mode, so the
    discretization error mixes the clustered eigenvectors.
    """
    mults = np.array(list(cluster) + list(rest), dtype=float)
    if np.any(mults <= 0):
        raise InvalidArgument("multipliers must be positive")
    n = mults.size
    rng = np.random.default_rng(seed)
    S0 = np.zeros((n, n))
    for b in range(n // 2):
        w = b + 1
        S0[2 * b, 2 * b + 1] = w
        S0[2 * b + 1, 2 * b] = -w
    W, _ = np.linalg.qr(rng.standard_normal((n, n)))
    S = W @ S0 @ W.T
    S = 0.5 * (S - S.T)
    M = np.diag(np.log(mults) / TWO_PI)
    return rotating_frame(S, M)


# ---------------------------------------------------------------------------
# coupled Stuart-Landau oscillators


def _sl_reduced(beta: float, delta: float):
    # anti-phase cycle x2 = -x1, y2 = -y1 reduces the coupling to -2*delta*(x+y)
    def f(t, z):
        x, y = z[0], z[1]
        r2 = x * x + y * y
        c = -2.0 * delta * (x + y)
        return np.array([x + beta * y - x * r2 + c, -beta * x + y - y * r2 + c])

    def jac(t, z):
        x, y = z[0], z[1]
        return np.array([
            [1 - 3 * x * x - y * y - 2 * delta, beta - 2 * x * y - 2 * delta],
            [-beta - 2 * x * y - 2 * delta, 1 - x * x - 3 * y * y - 2 * delta],
        ])

    return f, jac


def coupled_rhs(beta: float, delta: float) -> Callable:
    def f(t, z):
        x1, y1, x2, y2 = z
        c = delta * (x2 - x1 + y2 - y1)
        r1 = x1 * x1 + y1 * y1
        r2 = x2 * x2 + y2 * y2
        return np.array([
            x1 + beta * y1 - x1 * r1 + c,
            -beta * x1 + y1 - y1 * r1 + c,
            x2 + beta * y2 - x2 * r2 - c,
            -beta * x2 + y2 - y2 * r2 - c,
        ])
    return f


def coupled_jacobian(beta: float, delta: float, z: np.ndarray) -> np.ndarray:
    x1, y1, x2, y2 = z
    d = delta
    return np.array([
        [1 - 3 * x1 ** 2 - y1 ** 2 - d, beta - 2 * x1 * y1 - d, d, d],
        [-beta - 2 * x1 * y1 - d, 1 - x1 ** 2 - 3 * y1 ** 2 - d, d, d],
        [d, d, 1 - 3 * x2 ** 2 - y2 ** 2 - d, beta - 2 * x2 * y2 - d],
        [d, d, -beta - 2 * x2 * y2 - d, 1 - x2 ** 2 - 3 * y2 ** 2 - d],
    ])


@dataclass
class OrbitRecord:
    period: float
    x0: np.ndarray  # full 4-D state at t = 0
    newton_residuals: list
    closure: float
    beta: float
    delta: float

    @property
    def residual(self) -> float:
        return self.newton_residuals[-1]


_IVP = dict(method="DOP853", rtol=1e-13, atol=1e-13)


def _flow_with_variation(f, jac, z0, T):
    def rhs(t, w):
        z = w[:2]
        P = w[2:].reshape(2, 2)
        return np.concatenate([f(t, z), (jac(t, z) @ P).ravel()])
    w0 = np.concatenate([z0, np.eye(2).ravel()])
    sol = solve_ivp(rhs, (0.0, T), w0, **_IVP)
    if not sol.success:
        raise OrbitNotFound(f"integration failed: {sol.message}")
    w = sol.y[:, -1]
    return w[:2], w[2:].reshape(2, 2)


def find_antiphase_orbit(beta: float = 0.5, delta: float = 0.1,
                         max_newton: int = 50, tol: float = 1e-10,
                         delta_range=(0.0, 0.25)) -> OrbitRecord:
    """Anti-phase periodic orbit by single shooting.

    The phase condition pins the crossing ``y1(0) = 0``; the unknowns are
    ``x1(0)`` and the period.
    """
    lo, hi = delta_range
    if not lo <= delta < hi:
        raise InvalidArgument(f"delta must lie in [{lo}, {hi}), got {delta!r}")
    f, jac = _sl_reduced(beta, delta)
    # relax onto the cycle and estimate the period from two downward crossings
    def cross(t, z):
        return z[1]
    cross.direction = -1.0
    warm = solve_ivp(f, (0.0, 200.0), np.array([0.9, 0.1]), events=cross, **_IVP)
    ev = warm.t_events[0]
    if ev.size < 3:
        raise OrbitNotFound("no periodic crossing found during warm-up")
    T = float(ev[-1] - ev[-2])
    x = float(warm.y_events[0][-1][0])
    history = []
    for _ in range(max_newton):
        zT, P = _flow_with_variation(f, jac, np.array([x, 0.0]), T)
        r = zT - np.array([x, 0.0])
        res = float(np.linalg.norm(r))
        history.append(res)
        if res <= tol * max(1.0, abs(x)):
            break
        J = np.column_stack([P[:, 0] - np.array([1.0, 0.0]), f(T, zT)])
        dx, dT = np.linalg.solve(J, -r)
        x += dx
        T += dT
    else:
        raise OrbitNotFound(f"Newton did not converge in {max_newton} iterations",
                            residuals=history)
    z0 = np.array([x, 0.0, -x, 0.0])
    full = solve_ivp(coupled_rhs(beta, delta), (0.0, T), z0, **_IVP)
    closure = float(np.linalg.norm(full.y[:, -1] - z0))
    return OrbitRecord(T, z0, history, closure, beta, delta)


def coupled_stuart_landau(beta: float = 0.5, delta: float = 0.1, p: int = 1024,
                          orbit: OrbitRecord | None = None):
    """Variational system along the anti-phase orbit on a uniform grid.

    Returns ``(system, orbit)``. The grid period is the orbit period.
    """
    if orbit is None:
        orbit = find_antiphase_orbit(beta, delta)
    grid = build_uniform(p, orbit.period)
    times = grid.times[1:]
    traj = solve_ivp(coupled_rhs(beta, delta), (0.0, orbit.period), orbit.x0,
                     t_eval=times, **_IVP)
    samples = [coupled_jacobian(beta, delta, traj.y[:, i]) for i in range(p)]
    return SampledLptvSystem(grid, samples), orbit


# ---------------------------------------------------------------------------
# convergence studies


@dataclass
class StudyRecord:
    scheme: str
    p: int
    dt_max: float
    e_val: float
    e_vec: float
    angle: float
    spurious_log10: list = field(default_factory=list)
    error: str | None = None


@dataclass
class ConvergenceStudy:
    records: list
    slopes: dict  # scheme -> {"e_val": s, "e_vec": s, "angle": s}

    def rows(self) -> list:
        return [[r.scheme, r.p, r.dt_max, r.e_val, r.e_vec, r.angle] for r in self.records]

    def by_scheme(self, name: str) -> list:
        return [r for r in self.records if r.scheme == name]


def fit_slope(h: Sequence[float], e: Sequence[float], drop_coarse_above: float = 0.1) -> float:
    """Least-squares slope of ``log e`` against ``log h``.

    The coarsest point is dropped when its error exceeds ``drop_coarse_above``
    and at least four points remain.
    """
    h = np.asarray(h, dtype=float)
    e = np.asarray(e, dtype=float)
    ok = (h > 0) & (e > 0) & np.isfinite(e)
    h, e = h[ok], e[ok]
    order = np.argsort(-h)
    h, e = h[order], e[order]
    if h.size > 4 and e[0] > drop_coarse_above:
        h, e = h[1:], e[1:]
    if h.size < 2:
        return math.nan
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def toy_grid(p: int, pattern=(1.0, 2.0)) -> PeriodicGrid:
    if p % len(pattern):
        raise InvalidArgument(f"p={p} is not a multiple of the pattern length")
    return build_pattern(TWO_PI, pattern, p // len(pattern))


def run_convergence(exact: ExactFloquet, schemes: Sequence[str], p_values: Sequence[int],
                    pattern=(1.0, 2.0), which: int = 0, cluster: int = 1,
                    solver: str = "dense") -> ConvergenceStudy:
    """Errors of multiplier ``which`` and of the leading ``cluster``-dim subspace.

    ``e_vec`` compares the slice-0 eigenvector with the exact one; ``angle``
    is the largest principal angle between the dominant ``cluster``-dim
    Schur subspace and the exact invariant subspace.
    """
    records = []
    for name in schemes:
        sch = scheme_by_name(name)
        for p in p_values:
            grid = toy_grid(p, pattern)
            try:
                system = sample(exact, grid)
                sol = solve(system, sch, solver=solver, k=max(which + 1, cluster))
                e_val = eig_error(sol.multipliers[which], exact.multipliers[which])
                e_vec = vec_error(sol.eigenvectors[which][0], exact.vectors0[:, which])
                basis = sol.diagnostics.get("schur_basis")
                if basis is not None:
                    angle = subspace_angle(basis[:, :cluster], exact.subspace(cluster))
                else:
                    angle = subspace_angle(np.column_stack(
                        [sol.eigenvectors[j][0] for j in range(cluster)]), exact.subspace(cluster))
                spur = [v.log10_abs() for v, t in zip(sol.spectrum, sol.spectrum_tags)
                        if t == SPURIOUS]
                records.append(StudyRecord(name, p, grid.max_step, e_val, e_vec, angle, spur))
            except FloquetError as exc:
                log.warning("study cell %s p=%d failed: %s", name, p, exc)
                records.append(StudyRecord(name, p, grid.max_step, math.nan, math.nan,
                                           math.nan, [], error=exc.category))
    slopes = {}
    for name in schemes:
        rs = [r for r in records if r.scheme == name]
        h = [r.dt_max for r in rs]
        slopes[name] = {key: fit_slope(h, [getattr(r, key) for r in rs])
                        for key in ("e_val", "e_vec", "angle")}
    return ConvergenceStudy(records, slopes)


def spurious_slope(exact: ExactFloquet, scheme_name: str, p_values: Sequence[int],
                   pattern=(1.0, 2.0)) -> tuple:
    """Per-eigenvalue slopes of ``log10 |lambda_spurious|`` against ``p``.

    Returns ``(slopes, table)`` where ``table[i]`` lists the sorted spurious
    log-magnitudes at ``p_values[i]``.
    """
    sch = scheme_by_name(scheme_name)
    table = []
    for p in p_values:
        sol = solve(sample(exact, toy_grid(p, pattern)), sch, solver="dense")
        spur = sorted(v.log10_abs() for v, t in zip(sol.spectrum, sol.spectrum_tags)
                      if t == SPURIOUS)
        table.append(spur)
    counts = {len(r) for r in table}
    if len(counts) != 1:
        raise FloquetError(f"spurious count changes with p: {sorted(counts)}")
    T = np.array(table)
    x = np.asarray(p_values, dtype=float)
    slopes = [float(np.polyfit(x, T[:, j], 1)[0]) for j in range(T.shape[1])]
    return slopes, table
