"""Two-port transfer matrices for parametric amplifiers and beam-splitter
controllers, plus feedback closure and cascade composition.

The amplifier is an ideal non-degenerate parametric amplifier (NDPA) with
signal/idler transfer functions

    g1(s) = (s^2 - kappa^2/4 - eps^2) / D(s)
    g2(s) = -kappa*eps / D(s)
    D(s)  = s^2 + kappa*s + kappa^2/4 - eps^2

arranged as the symmetric matrix [[g1, g2], [g2, g1]].  The controller is a
beam splitter [[alpha, -beta], [beta, alpha]] with alpha = +sqrt(1 - beta^2).

Two network topologies are supported:

* type A: each amplifier is closed in its own feedback loop, then the N
  closed loops are cascaded;
* type B: the N amplifiers are cascaded first and one loop is closed around
  the whole chain.

Cascades and the type-B closure are evaluated pointwise per frequency as
complex 2x2 matrix products; only the single amplifier is kept symbolic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .polyrat import ONE, Polynomial, Rational, S

# Loop denominator magnitudes below this floor are treated as singular.
CLOSURE_FLOOR = 1e-300


class SingularClosure(ZeroDivisionError):
    """Feedback-loop denominator 1 - G22*K21 vanishes."""


@dataclass(frozen=True)
class AmplifierParams:
    kappa: float
    epsilon: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @staticmethod
    def from_x(kappa, x):
        """Build from the normalized pump strength x = 2*eps/kappa."""
        return AmplifierParams(kappa=kappa, epsilon=x * kappa / 2)

    @property
    def x(self):
        return 2 * self.epsilon / self.kappa

    def stable(self):
        return 0 <= self.x < 1

    def dc_gains(self):
        """(G1, G2) = (g1(0), g2(0)); both real."""
        x = self.x
        return -(1 + x * x) / (1 - x * x), -2 * x / (1 - x * x)


@dataclass(frozen=True)
class ControllerParams:
    beta: float

    def __post_init__(self):
        if not -1 < self.beta < 1:
            raise ValueError("beta must lie in (-1, 1)")

    @property
    def alpha(self):
        # positive branch fixed; beta carries all sign freedom
        return math.sqrt(1 - self.beta * self.beta)


class Topology(enum.Enum):
    TYPE_A = "A"
    TYPE_B = "B"


@dataclass(frozen=True)
class NetworkSpec:
    topology: Topology
    n_amplifiers: int
    amp: AmplifierParams
    controller: ControllerParams

    def __post_init__(self):
        if self.n_amplifiers < 1:
            raise ValueError("n_amplifiers must be >= 1")


@dataclass(frozen=True)
class TwoPortRational:
    """2x2 matrix of rational transfer functions, row-major [[11,12],[21,22]]."""

    entries: tuple

    def at(self, omega):
        """Evaluate at s = i*omega."""
        z = 1j * omega
        m = np.array([[e(z) for e in row] for row in self.entries])
        return TwoPortComplex(entries=m, omega=omega)


@dataclass(frozen=True)
class TwoPortComplex:
    """2x2 complex matrix at a fixed frequency (omega=None: frequency-flat)."""

    entries: np.ndarray
    omega: float | None = None


def ndpa_transfer(p: AmplifierParams) -> TwoPortRational:
    """Symbolic NDPA two-port [[g1, g2], [g2, g1]]."""
    k, e = p.kappa, p.epsilon
    D = S * S + k * S + Polynomial([k * k / 4 - e * e])
    g1 = Rational(S * S - Polynomial([k * k / 4 + e * e]), D)
    g2 = Rational(Polynomial([-k * e]), D)
    return TwoPortRational(entries=((g1, g2), (g2, g1)))


def ndpa_at(p: AmplifierParams, omega) -> np.ndarray:
    """NDPA matrix at s = i*omega as a plain complex 2x2 array."""
    k, e = p.kappa, p.epsilon
    s = 1j * omega
    D = s * s + k * s + k * k / 4 - e * e
    g1 = (s * s - k * k / 4 - e * e) / D
    g2 = -k * e / D
    return np.array([[g1, g2], [g2, g1]])


def beam_splitter(c: ControllerParams) -> TwoPortComplex:
    a, b = c.alpha, c.beta
    return TwoPortComplex(entries=np.array([[a, -b], [b, a]], dtype=complex))


def _entries(m):
    if isinstance(m, (TwoPortRational, TwoPortComplex)):
        return m.entries
    return m


def close_feedback(g, k):
    """Close the loop of amplifier g through controller k.

    Accepts TwoPortRational/TwoPortComplex wrappers or bare 2x2 structures;
    entries only need ring arithmetic, so the same formulas serve the
    symbolic and the pointwise representation.
    """
    G = _entries(g)
    K = _entries(k)
    if isinstance(g, TwoPortRational) and isinstance(K, np.ndarray):
        # symbolic closure needs real scalar controller entries
        K = [[float(np.real(K[i][j])) for j in range(2)] for i in range(2)]
    g11, g12 = G[0][0], G[0][1]
    g21, g22 = G[1][0], G[1][1]
    k11, k12 = K[0][0], K[0][1]
    k21, k22 = K[1][0], K[1][1]

    den = 1 - g22 * k21
    if isinstance(den, Rational):
        if den.num.is_zero():
            raise SingularClosure("loop denominator identically zero")
    elif abs(den) < CLOSURE_FLOOR:
        raise SingularClosure(f"loop denominator vanishes ({den})")

    det_g = g11 * g22 - g12 * g21
    det_k = k11 * k22 - k12 * k21
    f11 = (g11 - k21 * det_g) / den
    f12 = g12 * k22 / den
    f21 = g21 * k11 / den
    f22 = (k12 + g22 * det_k) / den

    if isinstance(g, TwoPortRational):
        return TwoPortRational(entries=((f11, f12), (f21, f22)))
    m = np.array([[f11, f12], [f21, f22]])
    if isinstance(g, TwoPortComplex):
        return TwoPortComplex(entries=m, omega=g.omega)
    return m


def cascade(g, n: int):
    """n-fold cascade (matrix power) of a pointwise two-port."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = np.linalg.matrix_power(np.asarray(_entries(g)), n)
    if isinstance(g, TwoPortComplex):
        return TwoPortComplex(entries=m, omega=g.omega)
    return m


def eigen_pair(g1, g2):
    """Eigenvalues (g1+g2, g1-g2) of the symmetric two-port [[g1,g2],[g2,g1]]."""
    return g1 + g2, g1 - g2


def build_network(spec: NetworkSpec):
    """Frequency response omega -> TwoPortComplex for either topology."""
    K = beam_splitter(spec.controller)
    n = spec.n_amplifiers

    if spec.topology is Topology.TYPE_A:
        def response(omega):
            g = TwoPortComplex(entries=ndpa_at(spec.amp, omega), omega=omega)
            return cascade(close_feedback(g, K), n)
    else:
        def response(omega):
            g = TwoPortComplex(entries=ndpa_at(spec.amp, omega), omega=omega)
            return close_feedback(cascade(g, n), K)

    return response


def ccr_residuals(m):
    """Residuals of the three commutation-relation constraints on a two-port.

    Returns (| |m11|^2-|m12|^2 - 1 |, | |m22|^2-|m21|^2 - 1 |,
    |m21*conj(m11) - m22*conj(m12)|); all ~0 for physical amplifier matrices.
    """
    e = np.asarray(_entries(m))
    r1 = abs(abs(e[0, 0]) ** 2 - abs(e[0, 1]) ** 2 - 1.0)
    r2 = abs(abs(e[1, 1]) ** 2 - abs(e[1, 0]) ** 2 - 1.0)
    r3 = abs(e[1, 0] * np.conj(e[0, 0]) - e[1, 1] * np.conj(e[0, 1]))
    return (r1, r2, r3)
