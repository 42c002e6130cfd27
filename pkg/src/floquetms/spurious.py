"""Parasitic roots of a multistep scheme on a periodic grid.

Applied to ``x' = 0`` a d-step method is a scalar d-term recursion whose
period map is the product of the d x d stability companions. Its eigenvalues
are ``1`` (exactly, since the alpha's sum to zero) and ``nu_tau^p`` for the
``d - 1`` parasitic roots. The full discrete spectrum of an LPTV system
contains ``(d-1) n`` eigenvalues of roughly the same magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .escale import ExponentScaledValue, sort_key
from .grid import PeriodicGrid
from .multistep import MultistepScheme, period_coefficients, stability_companion
from .pschur import product_eigvals

SPURIOUS = "spurious-suspect"
PHYSICAL = "physical"
TAG_WINDOW_DECADES = 3.0


@dataclass(frozen=True)
class SpuriousPrediction:
    """Principal root first, then the parasitic roots by decreasing magnitude.

    ``powers[t]`` is ``nu_t^p`` in exponent-scaled form for the parasitic
    roots only.
    """

    roots: tuple
    powers: tuple
    p: int

    @property
    def predicted_log10_magnitudes(self) -> np.ndarray:
        return np.array([v.log10_abs() for v in self.powers])

    @property
    def spurious_roots(self) -> tuple:
        return self.roots[1:]


def _minimal_period(coeffs) -> int:
    p = len(coeffs)
    alphas = np.array([c.alpha for c in coeffs])
    for L in range(1, p + 1):
        if p % L == 0 and np.allclose(alphas, np.roll(alphas, -L, axis=0), rtol=1e-11, atol=1e-13):
            return L
    return p


def scalar_roots(sch: MultistepScheme, grid: PeriodicGrid) -> SpuriousPrediction:
    """Roots ``nu_tau`` of the scheme on ``grid``.

    When the coefficient sequence repeats with a pattern of length ``L``,
    roots are ``L``-th roots of the pattern product, so a uniform grid
    reproduces the classical characteristic roots including their argument.
    Otherwise they are principal ``p``-th roots of the period product.
    """
    coeffs = period_coefficients(sch, grid)
    p = grid.p
    if sch.d == 1:
        return SpuriousPrediction((1.0 + 0j,), (), p)
    L = _minimal_period(coeffs)
    F = stability_companion(coeffs[:L])
    eig = product_eigvals(F)
    # pin the principal root: the eigenvalue closest to 1
    dist = [abs(v.to_complex() - 1.0) if v.log2_abs() < 64 else np.inf for v in eig]
    ip = int(np.argmin(dist))
    parasitic = sorted((v for t, v in enumerate(eig) if t != ip), key=sort_key)
    reps = p // L
    roots = [1.0 + 0j] + [v.root(L).to_complex() for v in parasitic]
    powers = tuple(v ** reps for v in parasitic)
    return SpuriousPrediction(tuple(roots), powers, p)


def tag_spectrum(eigs, prediction: SpuriousPrediction, n: int | None = None) -> list:
    """Tag eigenvalues within three decades of a predicted spurious magnitude."""
    preds = prediction.predicted_log10_magnitudes
    tags = []
    for v in eigs:
        if not isinstance(v, ExponentScaledValue):
            v = ExponentScaledValue.from_complex(v)
        lv = v.log10_abs()
        near = preds.size > 0 and (
            lv == -np.inf or np.min(np.abs(preds - lv)) <= TAG_WINDOW_DECADES
        )
        tags.append(SPURIOUS if near else PHYSICAL)
    return tags


def spurious_bound_log10(prediction: SpuriousPrediction) -> float:
    """``log10(|nu_max|^p * 1e3)``; Ritz values below this are suspect."""
    preds = prediction.predicted_log10_magnitudes
    return float(preds.max() + TAG_WINDOW_DECADES) if preds.size else -np.inf
