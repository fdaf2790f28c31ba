"""
Scalar rational transfer functions in the Laplace variable s.

Polynomials store coefficients in ascending powers of s. Arithmetic is exact
on the cross-multiplied forms; no pole-zero cancellation is attempted.

"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from upsc.errors import DivisionByZeroFunction, InvalidBandwidth, PoleProximity

#: Relative pole guard: |den(s)| below this times max|den coeff| is a pole hit.
POLE_GUARD = 1e-12


def _trim(coeffs) -> tuple:
    c = [complex(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    if not c:
        c = [0j]
    return tuple(c)


@dataclass(frozen=True)
class Polynomial:
    """Polynomial in s, coefficients in ascending powers."""

    coeffs: tuple

    def __init__(self, coeffs):
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.coeffs)

    def __call__(self, s):
        # Horner, highest power first
        acc = np.zeros_like(s, dtype=complex) if np.ndim(s) else 0j
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def __add__(self, other: Polynomial) -> Polynomial:
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0j,) * (n - len(self.coeffs))
        b = other.coeffs + (0j,) * (n - len(other.coeffs))
        return Polynomial([x + y for x, y in zip(a, b)])

    def __mul__(self, other: Polynomial) -> Polynomial:
        out = [0j] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, x in enumerate(self.coeffs):
            for j, y in enumerate(other.coeffs):
                out[i + j] += x * y
        return Polynomial(out)

    def scale(self, c: complex) -> Polynomial:
        return Polynomial([c * x for x in self.coeffs])

    def roots(self) -> np.ndarray:
        """Roots via the companion matrix (numpy wants descending order)."""
        if self.degree == 0:
            return np.array([], dtype=complex)
        return np.roots(self.coeffs[::-1])

    def max_abs_coeff(self) -> float:
        return max(abs(c) for c in self.coeffs)


@dataclass(frozen=True)
class RationalFunction:
    """Ratio num(s)/den(s) of two polynomials."""

    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        if self.den.is_zero():
            raise DivisionByZeroFunction("denominator is the zero polynomial")

    @classmethod
    def from_coeffs(cls, num, den=(1.0,)) -> RationalFunction:
        """Build from ascending-power coefficient sequences."""
        return cls(Polynomial(num), Polynomial(den))

    @classmethod
    def constant(cls, c: complex) -> RationalFunction:
        return cls.from_coeffs([c])

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_real(self) -> bool:
        return self.num.is_real() and self.den.is_real()

    def __call__(self, s: complex) -> complex:
        return evaluate(self, s)

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_coerce(other), -1.0))

    def __rsub__(self, other):
        return add(_coerce(other), scale(self, -1.0))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return scale(self, -1.0)

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def zeros(self) -> np.ndarray:
        return self.num.roots()


def _coerce(x) -> RationalFunction:
    if isinstance(x, RationalFunction):
        return x
    return RationalFunction.constant(x)


def evaluate(f: RationalFunction, s):
    """
    Evaluate f at s (complex scalar or array).

    Raises
    ------
    PoleProximity
        If |den(s)| falls below the relative pole guard at any point.

    """
    d = f.den(s)
    hit = np.abs(d) < POLE_GUARD * f.den.max_abs_coeff()
    if np.any(hit):
        s_bad = np.asarray(s)[hit].flat[0] if np.ndim(s) else s
        raise PoleProximity(f"evaluation at s={complex(s_bad)!r} is at a pole",
                            s=complex(s_bad))
    return f.num(s) / d


def add(f: RationalFunction, g: RationalFunction) -> RationalFunction:
    if f.den == g.den:
        return RationalFunction(f.num + g.num, f.den)
    return RationalFunction(f.num * g.den + g.num * f.den, f.den * g.den)


def mul(f: RationalFunction, g: RationalFunction) -> RationalFunction:
    return RationalFunction(f.num * g.num, f.den * g.den)


def div(f: RationalFunction, g: RationalFunction) -> RationalFunction:
    if g.is_zero():
        raise DivisionByZeroFunction("division by the zero function")
    return RationalFunction(f.num * g.den, f.den * g.num)


def scale(f: RationalFunction, c: complex) -> RationalFunction:
    return RationalFunction(f.num.scale(c), f.den)


def lowpass(alpha: float) -> RationalFunction:
    """First-order low-pass filter alpha/(s + alpha)."""
    if not alpha > 0:
        raise InvalidBandwidth(f"low-pass bandwidth must be positive, got {alpha}")
    return RationalFunction.from_coeffs([alpha], [alpha, 1.0])


#: The Laplace variable itself.
S = RationalFunction.from_coeffs([0.0, 1.0])
