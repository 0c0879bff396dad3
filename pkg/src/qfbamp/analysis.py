"""Stability and robustness analysis of the two feedback topologies.

Type A reduces to a quadratic characteristic polynomial with a closed-form
stability criterion.  Type B is checked with the Nyquist criterion on the
open-loop response L(iw) = -beta_B * [G(iw)^N]_22, counting encirclements of
(-1, 0) by accumulated-angle summation with adaptive curve refinement.  The
gain-fluctuation experiment draws a uniform relative perturbation of the
pump strength per sample from a deterministically derived per-sample seed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .network import (
    AmplifierParams,
    ControllerParams,
    NetworkSpec,
    Topology,
    build_network,
    ndpa_at,
)
from .polyrat import quadratic_roots

RNG_NAME = "numpy-PCG64(SeedSequence([seed, sample]))"

# adaptive Nyquist refinement: bisect any segment subtending more than this
# angle about (-1, 0), up to the point budget
MAX_SEGMENT_ANGLE = math.radians(10.0)
POINT_BUDGET = 2**20


class RefinementBudgetExceeded(RuntimeError):
    """Nyquist curve refinement hit its point budget near (-1, 0)."""


class NoPhaseCrossover(ValueError):
    """No -180 degree phase crossover found on the searched grid."""


class Spacing(enum.Enum):
    LOG = "log"
    LINEAR = "linear"


@dataclass(frozen=True)
class FrequencyGrid:
    omega_min: float = 1e3
    omega_max: float = 1e10
    points: int = 2000
    spacing: Spacing = Spacing.LOG

    def __post_init__(self):
        if not 0 < self.omega_min < self.omega_max:
            raise ValueError("require 0 < omega_min < omega_max")
        if self.points < 2:
            raise ValueError("points must be >= 2")

    def omegas(self):
        if self.spacing is Spacing.LOG:
            return np.logspace(math.log10(self.omega_min),
                               math.log10(self.omega_max), self.points)
        return np.linspace(self.omega_min, self.omega_max, self.points)


@dataclass(frozen=True)
class NyquistResult:
    curve: list            # (omega, complex L) pairs, positive half, refined
    encirclements: int
    stable: bool
    gain_margin_db: float
    omega_pc: float


@dataclass(frozen=True)
class MonteCarloRun:
    seed: int
    samples: int = 100
    relative_spread: float = 0.05
    grid: FrequencyGrid = field(default_factory=FrequencyGrid)


@dataclass(frozen=True)
class MonteCarloRecords:
    omegas: np.ndarray
    r_values: np.ndarray           # per-sample uniform draws in [-1, 1]
    gain_db_uncontrolled: np.ndarray   # shape (samples, n_freq)
    gain_db_type_a: np.ndarray
    gain_db_type_b: np.ndarray
    unstable: np.ndarray           # per-sample flag

    def spread_stats(self, column):
        """(min, max, std) over samples, per frequency, for one gain table."""
        g = getattr(self, column)
        return g.min(axis=0), g.max(axis=0), g.std(axis=0)


def type_a_stable(x, beta_A):
    """Closed-form criterion x < sqrt((1+beta_A)/(1-beta_A))."""
    if not 0 <= beta_A < 1:
        raise ValueError("require 0 <= beta_A < 1")
    return x < math.sqrt((1 + beta_A) / (1 - beta_A))


def type_a_char_coeffs(kappa, x, beta_A):
    """(a, b, c) of the single closed-loop characteristic quadratic."""
    eps = x * kappa / 2
    return (1.0,
            kappa / (1 - beta_A),
            (1 + beta_A) / (1 - beta_A) * kappa**2 / 4 - eps**2)


def type_a_stable_by_roots(kappa, x, beta_A):
    """Hurwitz check on the characteristic quadratic; cross-validates
    type_a_stable."""
    r1, r2 = quadratic_roots(*type_a_char_coeffs(kappa, x, beta_A))
    return r1.real < 0 and r2.real < 0


def open_loop_type_B(spec: NetworkSpec):
    """Open-loop response omega -> L(iw) = -beta_B * [G(iw)^N]_22."""
    if spec.topology is not Topology.TYPE_B:
        raise ValueError("open loop defined for the type-B topology")
    beta = spec.controller.beta
    n = spec.n_amplifiers

    def L(omega):
        g = ndpa_at(spec.amp, omega)
        return -beta * np.linalg.matrix_power(g, n)[1, 1]

    return L


def _winding_number(points, about=-1.0 + 0.0j):
    """Accumulated angle (in turns) of a point list around `about`."""
    total = 0.0
    prev = points[0] - about
    for p in points[1:]:
        cur = p - about
        total += np.angle(cur / prev)
        prev = cur
    return total / (2 * math.pi)


def _refine_curve(L, omegas, L_inf):
    """Positive-half Nyquist curve with adaptive bisection near (-1, 0).

    Includes omega = 0 and the analytic omega -> inf endpoint (math.inf marks
    it).  Any adjacent pair subtending more than MAX_SEGMENT_ANGLE about
    (-1, 0) is bisected in omega until resolved.
    """
    pts = [(0.0, L(0.0))]
    pts += [(float(w), L(w)) for w in omegas]
    pts.append((math.inf, complex(L_inf)))

    i = 0
    while i < len(pts) - 1:
        if len(pts) > POINT_BUDGET:
            raise RefinementBudgetExceeded(
                "indeterminate winding near (-1, 0): refinement budget hit")
        (w1, p1), (w2, p2) = pts[i], pts[i + 1]
        dang = abs(np.angle((p2 + 1.0) / (p1 + 1.0)))
        if dang <= MAX_SEGMENT_ANGLE:
            i += 1
            continue
        if math.isinf(w2):
            wm = w1 * 2
        elif w1 == 0.0:
            wm = w2 / 2
        else:
            wm = math.sqrt(w1 * w2)
        if wm <= w1 or wm >= w2:
            i += 1  # no representable midpoint left
            continue
        pts.insert(i + 1, (wm, L(wm)))
    return pts


def nyquist(spec: NetworkSpec, grid: FrequencyGrid | None = None):
    """Nyquist stability of the type-B loop plus gain margin."""
    if grid is None:
        grid = FrequencyGrid()
    if not spec.amp.stable():
        raise ValueError("Nyquist criterion requires a stable open loop (x < 1)")
    L = open_loop_type_B(spec)
    # high-frequency limit: g1 -> 1, g2 -> 0, so [G^N]_22 -> 1
    pts = _refine_curve(L, grid.omegas(), -spec.controller.beta)
    half = [p for _, p in pts]
    # closed contour = conjugate half (omega from -inf to 0) + positive half;
    # by symmetry both halves accumulate the same angle
    turns = 2.0 * _winding_number(half)
    enc = int(round(turns))
    if abs(turns - enc) > 1e-6:
        raise RefinementBudgetExceeded(
            f"winding number {turns} not integer-valued")
    try:
        gm_db, omega_pc = gain_margin(L, grid)
    except NoPhaseCrossover:
        gm_db, omega_pc = math.inf, math.nan
    return NyquistResult(curve=pts, encirclements=enc, stable=(enc == 0),
                         gain_margin_db=gm_db, omega_pc=omega_pc)


def gain_margin(L, grid: FrequencyGrid | None = None):
    """(gain margin in dB, phase-crossover frequency).

    Scans the grid for sign changes of Im L with Re L < 0, refines each by
    bisection, and returns the crossover with the smallest margin.
    """
    if grid is None:
        grid = FrequencyGrid()
    omegas = grid.omegas()
    vals = np.array([L(w) for w in omegas])

    crossings = []
    for i in range(len(omegas) - 1):
        a, b = vals[i], vals[i + 1]
        if a.imag == 0.0 and a.real < 0:
            crossings.append(omegas[i])
            continue
        if np.sign(a.imag) != np.sign(b.imag) and (a.real < 0 or b.real < 0):
            lo, hi = omegas[i], omegas[i + 1]
            flo = a.imag
            while (hi - lo) > 1e-10 * hi:
                mid = (lo + hi) / 2
                fm = L(mid).imag
                if np.sign(fm) == np.sign(flo):
                    lo, flo = mid, fm
                else:
                    hi = mid
            wpc = (lo + hi) / 2
            if L(wpc).real < 0:
                crossings.append(wpc)

    if not crossings:
        # degenerate constant-negative-real loop: phase is 180 deg everywhere
        if np.all(vals.imag == 0.0) and np.all(vals.real < 0):
            wpc = omegas[int(np.argmax(np.abs(vals)))]
            return -20 * math.log10(abs(L(wpc))), wpc
        raise NoPhaseCrossover("no -180 degree crossing on the grid")

    best = min(crossings, key=lambda w: -abs(L(w)))
    return -20 * math.log10(abs(L(best))), best


def _sample_r(seed, index):
    """Uniform draw on [-1, 1] for one sample; r = 2*u - 1, u ~ U[0, 1)."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    return 2.0 * rng.random() - 1.0


def _mat_pow_11(c11, c12, c21, c22, n):
    """(1,1) entry of the n-th power of elementwise-array 2x2 matrices."""
    p11, p12, p21, p22 = c11, c12, c21, c22
    for _ in range(n - 1):
        p11, p12, p21, p22 = (p11 * c11 + p12 * c21,
                              p11 * c12 + p12 * c22,
                              p21 * c11 + p22 * c21,
                              p21 * c12 + p22 * c22)
    return p11


def gain_curves_db(kappa, x, beta_A, beta_B, n_amplifiers, omegas):
    """|gain| in dB of the uncontrolled cascade, type A, and type B over a
    frequency array, vectorized.

    The bare NDPA keeps the equal-diagonal symmetric form at all frequencies
    and diagonalizes with eigenvalues g1 +- g2.  Its closure does not (the
    diagonal entries split off dc, where g1^2 - g2^2 != 1), so the type-A
    cascade is taken by explicit elementwise 2x2 powers.  Must agree with the
    matrix route of `network.build_network` (tested); exists because the
    Monte Carlo sweep evaluates ~10^5 points.
    """
    omegas = np.asarray(omegas, dtype=float)
    s = 1j * omegas
    eps = x * kappa / 2
    D = s * s + kappa * s + kappa**2 / 4 - eps**2
    g1 = (s * s - kappa**2 / 4 - eps**2) / D
    g2 = -kappa * eps / D
    lp, lm = g1 + g2, g1 - g2
    n = n_amplifiers

    uncontrolled = (lp**n + lm**n) / 2

    a_A = math.sqrt(1 - beta_A * beta_A)
    den_a = 1 - g1 * beta_A
    det_g = g1 * g1 - g2 * g2
    c11 = (g1 - beta_A * det_g) / den_a
    c12 = g2 * a_A / den_a
    c22 = (g1 - beta_A) / den_a        # K is unitary: det K = 1
    type_a = _mat_pow_11(c11, c12, c12, c22, n)

    m1 = (lp**n + lm**n) / 2
    m2 = (lp**n - lm**n) / 2
    det_gn = det_g**n
    type_b = (m1 - beta_B * det_gn) / (1 - m1 * beta_B)

    to_db = lambda v: 20 * np.log10(np.abs(v))
    return to_db(uncontrolled), to_db(type_a), to_db(type_b)


def monte_carlo(kappa, x, beta_A, beta_B, n_amplifiers, run: MonteCarloRun):
    """Gain-fluctuation experiment: per sample, eps' = (1 + spread*r)*eps with
    r ~ U[-1, 1], applied identically to all amplifiers; records |gain| in dB
    of the uncontrolled cascade and both closed topologies over the grid.

    Unstable draws are flagged, never dropped.  Controllers stay at their
    nominal calibration.
    """
    omegas = run.grid.omegas()
    n_freq = len(omegas)

    r_values = np.array([_sample_r(run.seed, i) for i in range(run.samples)])
    gu = np.empty((run.samples, n_freq))
    ga = np.empty((run.samples, n_freq))
    gb = np.empty((run.samples, n_freq))
    unstable = np.zeros(run.samples, dtype=bool)

    for i, r in enumerate(r_values):
        xp = (1 + run.relative_spread * r) * x
        unstable[i] = not (0 <= xp < 1 and type_a_stable(xp, abs(beta_A)))
        gu[i], ga[i], gb[i] = gain_curves_db(
            kappa, xp, beta_A, beta_B, n_amplifiers, omegas)

    return MonteCarloRecords(omegas=omegas, r_values=r_values,
                             gain_db_uncontrolled=gu, gain_db_type_a=ga,
                             gain_db_type_b=gb, unstable=unstable)


def peaking_frequency(kappa, x, beta_B, n_amplifiers, grid: FrequencyGrid):
    """Grid frequency maximizing the nominal type-B gain."""
    spec = NetworkSpec(topology=Topology.TYPE_B, n_amplifiers=n_amplifiers,
                       amp=AmplifierParams.from_x(kappa, x),
                       controller=ControllerParams(beta=beta_B))
    resp = build_network(spec)
    omegas = grid.omegas()
    gains = [abs(resp(w).entries[0, 0]) for w in omegas]
    return float(omegas[int(np.argmax(gains))])
