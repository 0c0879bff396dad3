"""Real-coefficient polynomials and rational functions in the Laplace variable s.

Coefficients are stored in ascending degree order, so coeffs[k] multiplies s**k.
These objects stay small (degree <= 2 in practice); high-order network responses
are evaluated pointwise in `network` instead of being composed symbolically.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

# |den(z)| below this absolute floor counts as evaluation at a pole.
POLE_FLOOR = 1e-300


class PoleAtPoint(ZeroDivisionError):
    """Rational function evaluated at (or numerically at) a pole."""


class DivisionByZeroRational(ZeroDivisionError):
    """Division by a rational whose numerator is the zero polynomial."""


class DegenerateQuadratic(ValueError):
    """quadratic_roots called with leading coefficient zero."""


def _normalize(coeffs):
    # Strip exactly-zero trailing coefficients (cancellation in add/sub
    # produces exact zeros).  A magnitude-relative trim is unsafe here: the
    # transfer-function denominators mix coefficients spanning ~14 orders of
    # magnitude (kappa^2 vs the monic leading 1) that are all genuine.
    coeffs = [float(c) for c in coeffs]
    while coeffs and coeffs[-1] == 0.0:
        coeffs.pop()
    return coeffs


@dataclass(frozen=True)
class Polynomial:
    coeffs: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(_normalize(self.coeffs)))

    @property
    def degree(self):
        """Degree of the polynomial; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self):
        return not self.coeffs

    def __call__(self, z):
        # Horner evaluation, complex-safe.
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0.0] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0.0] * (n - len(other.coeffs))
        return Polynomial([x + y for x, y in zip(a, b)])

    def __neg__(self):
        return Polynomial([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __mul__(self, other):
        other = _as_poly(other)
        if self.is_zero() or other.is_zero():
            return Polynomial()
        out = [0.0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(out)

    __radd__ = __add__
    __rmul__ = __mul__

    def __rsub__(self, other):
        return _as_poly(other) - self


def _as_poly(v):
    if isinstance(v, Polynomial):
        return v
    if isinstance(v, (int, float)):
        return Polynomial([float(v)])
    raise TypeError(f"cannot coerce {type(v).__name__} to Polynomial")


#: The identity s -> s, convenient for building transfer functions.
S = Polynomial([0.0, 1.0])
ONE = Polynomial([1.0])


@dataclass(frozen=True)
class Rational:
    """Ratio of two real-coefficient polynomials. No GCD reduction is done."""

    num: Polynomial
    den: Polynomial = ONE

    def __post_init__(self):
        if self.den.is_zero():
            raise ZeroDivisionError("rational with zero denominator polynomial")

    @staticmethod
    def constant(c):
        return Rational(Polynomial([float(c)]))

    def __call__(self, z, pole_floor=POLE_FLOOR):
        d = self.den(z)
        if abs(d) < pole_floor:
            raise PoleAtPoint(f"denominator magnitude {abs(d):g} at z={z}")
        return self.num(z) / d

    def __add__(self, other):
        other = _as_rat(other)
        return Rational(self.num * other.den + other.num * self.den,
                        self.den * other.den)

    def __neg__(self):
        return Rational(-self.num, self.den)

    def __sub__(self, other):
        return self + (-_as_rat(other))

    def __mul__(self, other):
        other = _as_rat(other)
        return Rational(self.num * other.num, self.den * other.den)

    def __truediv__(self, other):
        other = _as_rat(other)
        if other.num.is_zero():
            raise DivisionByZeroRational("division by zero rational")
        return Rational(self.num * other.den, self.den * other.num)

    __radd__ = __add__
    __rmul__ = __mul__

    def __rsub__(self, other):
        return _as_rat(other) - self

    def __rtruediv__(self, other):
        return _as_rat(other) / self


def _as_rat(v):
    if isinstance(v, Rational):
        return v
    if isinstance(v, Polynomial):
        return Rational(v)
    if isinstance(v, (int, float)):
        return Rational.constant(v)
    raise TypeError(f"cannot coerce {type(v).__name__} to Rational")


def poly_add(p, q):
    return p + q


def poly_mul(p, q):
    return p * q


def rat_eval(r, z, pole_floor=POLE_FLOOR):
    return r(z, pole_floor=pole_floor)


def rat_add(r1, r2):
    return r1 + r2


def rat_mul(r1, r2):
    return r1 * r2


def rat_div(r1, r2):
    return r1 / r2


def quadratic_roots(a, b, c):
    """Both roots of a*s**2 + b*s + c, numerically stable pairing.

    Uses the sign-matched form of the quadratic formula to avoid cancellation
    when b**2 >> |4ac|.
    """
    if a == 0:
        raise DegenerateQuadratic("leading coefficient is zero")
    disc = cmath.sqrt(complex(b * b - 4 * a * c))
    if b.real >= 0 or (b == 0):
        q = -(b + disc) / 2
    else:
        q = -(b - disc) / 2
    if q == 0:
        return (0j, 0j)
    r1 = q / a
    r2 = c / q
    return (r1, r2)
