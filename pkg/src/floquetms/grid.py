"""Periodic time grids.

A grid stores the absolute times ``0 = t_0 < ... < t_p = T`` of one period.
It is extended cyclically by ``t_{i+p} = t_i + T``, so every accessor takes
an arbitrary integer index. Steps and stepsize ratios are derived on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

DEFAULT_RATIO_BAND = (0.2, 5.0)


@dataclass(frozen=True, eq=False)
class PeriodicGrid:
    """Cyclic partition of one period.

    Parameters
    ----------
    times : array_like, shape (p + 1,)
        Strictly increasing times with ``times[0] == 0``; ``times[-1]`` is
        the period.
    ratio_band : (float, float)
        Admissible range for every ratio ``step(i) / step(i - 1)``,
        including the wrap-around ratio at ``i = 1``.
    """

    times: np.ndarray
    ratio_band: tuple = DEFAULT_RATIO_BAND
    _steps: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        if t.size < 2:
            raise InvalidArgument("a grid needs at least two times")
        if t[0] != 0.0:
            raise InvalidArgument(f"grid must start at 0, got {t[0]!r}")
        steps = np.diff(t)
        if np.any(steps <= 0) or not np.all(np.isfinite(t)):
            raise InvalidArgument("grid times must be finite and strictly increasing")
        lo, hi = self.ratio_band
        if not (0 < lo <= 1 <= hi):
            raise InvalidArgument(f"bad ratio band {self.ratio_band!r}")
        t.setflags(write=False)
        steps.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "_steps", steps)
        ratios = steps / np.roll(steps, 1)
        bad = np.flatnonzero((ratios < lo) | (ratios > hi))
        if bad.size:
            i = int(bad[0]) + 1
            raise InvalidArgument(
                f"stepsize ratio {ratios[bad[0]]:.6g} at slice {i} outside "
                f"band [{lo}, {hi}]"
            )

    @property
    def p(self) -> int:
        return self._steps.size

    @property
    def period(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> np.ndarray:
        """``steps[i - 1]`` is the step ending at ``t_i``, for i = 1..p."""
        return self._steps

    @property
    def max_step(self) -> float:
        return float(self._steps.max())

    def time(self, i: int) -> float:
        q, r = divmod(int(i), self.p)
        return float(self.times[r]) + q * self.period

    def step(self, i: int) -> float:
        """Step ``t_i - t_{i-1}`` for any integer ``i``."""
        return float(self._steps[(int(i) - 1) % self.p])

    def ratio(self, i: int) -> float:
        """Stepsize ratio ``step(i) / step(i - 1)``."""
        return self.step(i) / self.step(i - 1)

    def ratios(self) -> np.ndarray:
        """Ratios for i = 1..p."""
        return self._steps / np.roll(self._steps, 1)

    def __repr__(self):
        return f"PeriodicGrid(p={self.p}, period={self.period!r})"


def build_uniform(p: int, T: float, ratio_band=DEFAULT_RATIO_BAND) -> PeriodicGrid:
    if int(p) != p or p < 1:
        raise InvalidArgument(f"p must be a positive integer, got {p!r}")
    if not T > 0:
        raise InvalidArgument(f"period must be positive, got {T!r}")
    times = np.arange(p + 1) * (T / p)
    times[-1] = T
    return PeriodicGrid(times, ratio_band)


def build_pattern(T: float, pattern, repeats: int,
                  ratio_band=DEFAULT_RATIO_BAND) -> PeriodicGrid:
    """Grid whose steps repeat ``pattern`` and sum to ``T``.

    ``build_pattern(2*pi, [1, 2], 4)`` gives eight steps alternating
    ``2*pi/12`` and ``4*pi/12``.
    """
    w = np.asarray(pattern, dtype=float).ravel()
    if w.size == 0 or np.any(~(w > 0)):
        raise InvalidArgument("pattern entries must be positive")
    if int(repeats) != repeats or repeats < 1:
        raise InvalidArgument(f"repeats must be a positive integer, got {repeats!r}")
    if not T > 0:
        raise InvalidArgument(f"period must be positive, got {T!r}")
    steps = np.tile(w, int(repeats))
    times = np.concatenate([[0.0], np.cumsum(steps)])
    times *= T / times[-1]
    times[-1] = T
    return PeriodicGrid(times, ratio_band)


def from_times(times, ratio_band=DEFAULT_RATIO_BAND) -> PeriodicGrid:
    return PeriodicGrid(np.asarray(times, dtype=float), ratio_band)


def h_factor(grid: PeriodicGrid, i: int, j: int, d: int) -> float:
    """Scaled offset ``(t_{i+j} - t_i) / (t_{i+d} - t_{i+d-1})``.

    Depends only on stepsize ratios; equals ``j`` on uniform grids.
    """
    if d < 1:
        raise InvalidArgument(f"d must be >= 1, got {d!r}")
    if not 0 <= j <= d:
        raise InvalidArgument(f"j must lie in 0..{d}, got {j!r}")
    if j == 0:
        return 0.0
    last = grid.step(i + d)
    tol = 4 * np.finfo(float).eps * grid.period
    return float(sum(_unit_ratio(grid.step(i + l), last, tol) for l in range(1, j + 1)))


def _unit_ratio(a: float, b: float, tol: float) -> float:
    # steps recovered from absolute times carry an error of order eps*T;
    # differences below that are rounding, not grading
    return 1.0 if abs(a - b) <= tol else a / b
