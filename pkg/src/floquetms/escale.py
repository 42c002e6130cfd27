"""Complex numbers with an unbounded binary exponent.

Floquet multipliers of strongly stable or unstable cycles easily leave the
double range once accumulated over thousands of slices, so magnitudes are
kept as ``mantissa * 2**exponent`` with ``1 <= |mantissa| < 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

_CHUNK = 512


def _normalize(m: complex, e: int) -> tuple:
    a = abs(m)
    if a == 0.0 or not math.isfinite(a):
        if a == 0.0:
            return 0j, 0
        raise ValueError("non-finite mantissa")
    _, k = math.frexp(a)  # a = f * 2**k with f in [0.5, 1)
    k -= 1
    return complex(m) * 2.0 ** (-k), int(e + k)


@dataclass(frozen=True)
class ExponentScaledValue:
    """``mantissa * 2**exponent``; zero is stored as ``(0, 0)``."""

    mantissa: complex
    exponent: int

    def __post_init__(self):
        m, e = _normalize(complex(self.mantissa), int(self.exponent))
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def from_complex(cls, z) -> "ExponentScaledValue":
        return cls(complex(z), 0)

    @classmethod
    def product(cls, factors: Iterable) -> "ExponentScaledValue":
        """Product of many complex factors without overflow or underflow."""
        f = np.asarray(list(factors), dtype=complex).ravel()
        m, e = 1.0 + 0j, 0
        for s in range(0, f.size, _CHUNK):
            chunk = f[s:s + _CHUNK]
            mag = np.abs(chunk)
            if np.any(mag == 0):
                return cls(0j, 0)
            mant, exps = np.frexp(mag)
            ph = np.prod(chunk / mag)
            m *= complex(ph) * float(np.prod(mant))  # >= 2**-512
            e += int(exps.sum())
            m, e = _normalize(m, e)
        return cls(m, e)

    @classmethod
    def from_log2(cls, log2_abs: float, phase: complex = 1.0) -> "ExponentScaledValue":
        k = math.floor(log2_abs)
        return cls(complex(phase) / abs(phase) * 2.0 ** (log2_abs - k), k)

    def __mul__(self, other):
        o = _coerce(other)
        return ExponentScaledValue(self.mantissa * o.mantissa, self.exponent + o.exponent)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(other)
        if o.mantissa == 0:
            raise ZeroDivisionError("division by an exponent-scaled zero")
        return ExponentScaledValue(self.mantissa / o.mantissa, self.exponent - o.exponent)

    def __pow__(self, k: int):
        if int(k) != k:
            raise ValueError("only integer powers are supported")
        k = int(k)
        if self.mantissa == 0:
            return ExponentScaledValue(0j, 0) if k > 0 else ExponentScaledValue(1, 0)
        la = self.log2_abs() * k
        return ExponentScaledValue.from_log2(la, (self.mantissa / abs(self.mantissa)) ** k)

    def __neg__(self):
        return ExponentScaledValue(-self.mantissa, self.exponent)

    def __abs__(self) -> float:
        with np.errstate(over="ignore", under="ignore"):
            return float(np.ldexp(abs(self.mantissa), self.exponent))

    def __complex__(self) -> complex:
        return self.to_complex()

    def to_complex(self) -> complex:
        """Nearest double complex; overflows to inf and underflows to 0."""
        m = self.mantissa
        with np.errstate(over="ignore", under="ignore"):
            return complex(np.ldexp(m.real, self.exponent), np.ldexp(m.imag, self.exponent))

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def log2_abs(self) -> float:
        if self.mantissa == 0:
            return -math.inf
        return math.log2(abs(self.mantissa)) + self.exponent

    def log10_abs(self) -> float:
        return self.log2_abs() * math.log10(2.0)

    def root(self, p: int) -> "ExponentScaledValue":
        """Principal ``p``-th root."""
        if self.mantissa == 0:
            return self
        ph = np.exp(1j * np.angle(self.mantissa) / p)
        return ExponentScaledValue.from_log2(self.log2_abs() / p, ph)

    def rel_diff(self, other) -> float:
        """``|self - other| / |other|`` computed exponent-aware."""
        o = _coerce(other)
        if o.mantissa == 0:
            raise ZeroDivisionError("relative difference to zero")
        q = (self / o).to_complex()
        return abs(q - 1.0)

    def __repr__(self):
        return f"ExponentScaledValue({self.mantissa!r}, {self.exponent})"

    def __str__(self):
        la = self.log10_abs()
        if self.mantissa == 0:
            return "0"
        if abs(la) < 300:
            return str(self.to_complex())
        k = math.floor(la)
        z = self.mantissa / abs(self.mantissa) * 10 ** (la - k)
        return f"({z.real:.6g}{z.imag:+.6g}j)e{k}"


def _coerce(x) -> ExponentScaledValue:
    return x if isinstance(x, ExponentScaledValue) else ExponentScaledValue.from_complex(x)


def sort_key(v: ExponentScaledValue) -> float:
    """Key for descending-magnitude sorts: ``sorted(vals, key=sort_key)``."""
    return -v.log2_abs()
