"""Sensitivity of the closed-loop gain to amplifier-gain uncertainty.

All quantities here live at the center frequency omega = 0, where the
amplifier matrix is real symmetric [[G1, G2], [G2, G1]] with G1^2 - G2^2 = 1
and is diagonalized by P = [[1, 1], [1, -1]]/sqrt(2) with eigenvalues
lambda_pm = G1 +- G2.  The controller matrix [[alpha, -beta], [beta, alpha]]
enters the closed-loop formulas through K1 = alpha and K2 = -beta.

Conventions for an N-amplifier chain:

* type A closes each amplifier individually: closed-loop eigenvalues
  lfb_pm = (G1 + K2A +- G2*K1A) / (1 + G1*K2A), overall diagonal/off-diagonal
  gains (lfb_+^N +- lfb_-^N)/2;
* type B cascades first (M1, M2 = (l_+^N +- l_-^N)/2) and closes one loop:
  overall gains (M1 + K2B)/(1 + M1*K2B) and M2*K1B/(1 + M1*K2B).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

GAIN_MATCH_RTOL = 1e-8


class SingularLoop(ZeroDivisionError):
    """A 1 + (gain)*(feedback) loop denominator vanishes."""


class ZeroGain(ZeroDivisionError):
    """Closed-loop gain is zero where a ratio against it is required."""


class NoSolution(ValueError):
    """Gain-matching calibration has no beam-splitter solution."""


@dataclass(frozen=True)
class SensitivityReport:
    s_a: float
    s_b: float
    S_A: float
    S_B: float
    ratio: float
    gain_matched: bool
    gain_db: float


@dataclass(frozen=True)
class PerturbationModel:
    """First-order CCR-consistent perturbation (G1, G2) -> (G1+d1, G2+d2).

    The constraint G1^2 - G2^2 = 1 forces G2*d2 = G1*d1 to first order.
    """

    g1: float
    g2: float
    delta_g1: float

    @property
    def delta_g2(self):
        if self.g2 == 0:
            raise ZeroGain("delta_g2 undefined at G2 = 0")
        return self.g1 * self.delta_g1 / self.g2


def dc_gains_from_x(x):
    """(G1, G2) of the ideal NDPA at omega=0 for pump strength x in [0, 1)."""
    if not 0 <= x < 1:
        raise ValueError("require 0 <= x < 1 for a stable amplifier")
    return -(1 + x * x) / (1 - x * x), -2 * x / (1 - x * x)


def classical_closed_gain(G, K):
    den = 1 + G * K
    if den == 0:
        raise SingularLoop("1 + G*K = 0")
    return G / den


def classical_sensitivities(G, K_a, K_b, N):
    den_a = 1 + G * K_a
    den_b = 1 + G**N * K_b
    if den_a == 0 or den_b == 0:
        raise SingularLoop("classical loop denominator vanishes")
    return 1 / den_a, 1 / den_b


def _type_a_gains(G1, G2, beta_A, N):
    """(closed diagonal gain, closed off-diagonal gain, loop denominator)."""
    K1A = math.sqrt(1 - beta_A * beta_A)
    K2A = -beta_A
    den = 1 + G1 * K2A
    if den == 0:
        raise SingularLoop("1 + G1*K2A = 0")
    lp = (G1 + K2A + G2 * K1A) / den
    lm = (G1 + K2A - G2 * K1A) / den
    return (lp**N + lm**N) / 2, (lp**N - lm**N) / 2, den


def _type_b_gains(G1, G2, beta_B, N):
    K1B = math.sqrt(1 - beta_B * beta_B)
    K2B = -beta_B
    M1, M2 = cascade_dc(G1, G2, N)
    den = 1 + M1 * K2B
    if den == 0:
        raise SingularLoop("1 + M1*K2B = 0")
    return (M1 + K2B) / den, M2 * K1B / den, den


def cascade_dc(G1, G2, N):
    """(M1, M2): diagonal/off-diagonal entries of the N-fold cascade at omega=0."""
    lp, lm = G1 + G2, G1 - G2
    return (lp**N + lm**N) / 2, (lp**N - lm**N) / 2


def quantum_sensitivity_A(G1, G2, beta_A, N):
    if G2 == 0:
        raise ZeroGain("G2 = 0: sensitivity undefined")
    K1A = math.sqrt(1 - beta_A * beta_A)
    K2A = -beta_A
    gfb1, gfb2, den = _type_a_gains(G1, G2, beta_A, N)
    if gfb1 == 0:
        raise ZeroGain("closed-loop gain is zero")
    return K1A * G1 / (G2 * den) * (gfb2 / gfb1)


def quantum_sensitivity_B(G1, G2, beta_B, N):
    if G2 == 0:
        raise ZeroGain("G2 = 0: sensitivity undefined")
    K1B = math.sqrt(1 - beta_B * beta_B)
    gfb1, gfb2, den = _type_b_gains(G1, G2, beta_B, N)
    if gfb1 == 0:
        raise ZeroGain("closed-loop gain is zero")
    return K1B * G1 / (G2 * den) * (gfb2 / gfb1)


def calibrate_beta_B(x, beta_A, N):
    """Reflectivity beta_B that matches the type-B dc gain to type-A's.

    Solving (M1 + K2B)/(1 + M1*K2B) = g for K2B gives
    K2B = (M1 - g)/(g*M1 - 1); beta_B = -K2B.
    """
    G1, G2 = dc_gains_from_x(x)
    g, _, _ = _type_a_gains(G1, G2, beta_A, N)
    M1, _ = cascade_dc(G1, G2, N)
    if g * M1 == 1:
        raise NoSolution("g*M1 = 1: calibration equation degenerate")
    K2B = (M1 - g) / (g * M1 - 1)
    beta_B = -K2B
    if not -1 < beta_B < 1:
        raise NoSolution(f"calibrated beta_B={beta_B} outside (-1, 1)")
    gfb1B, _, _ = _type_b_gains(G1, G2, beta_B, N)
    if abs(abs(gfb1B) - abs(g)) > 1e-10 * abs(g):
        raise NoSolution("calibration failed its gain-match postcondition")
    return beta_B


def verify_main_theorem(x, beta_A, N):
    """Compare |S_B| with |S_A| at matched dc gain; |S_B| < |S_A| whenever the
    matched gain is below the uncontrolled cascade gain |M1|."""
    G1, G2 = dc_gains_from_x(x)
    beta_B = calibrate_beta_B(x, beta_A, N)
    S_A = quantum_sensitivity_A(G1, G2, beta_A, N)
    S_B = quantum_sensitivity_B(G1, G2, beta_B, N)
    gfb1A, _, _ = _type_a_gains(G1, G2, beta_A, N)
    gfb1B, _, _ = _type_b_gains(G1, G2, beta_B, N)
    matched = abs(abs(gfb1A) - abs(gfb1B)) <= GAIN_MATCH_RTOL * abs(gfb1A)
    # classical baselines with the same loop couplings (K2 plays the role of K)
    s_a = 1 / (1 + G1 * (-beta_A))
    M1, _ = cascade_dc(G1, G2, N)
    s_b = 1 / (1 + M1 * (-beta_B))
    return SensitivityReport(
        s_a=s_a,
        s_b=s_b,
        S_A=S_A,
        S_B=S_B,
        ratio=abs(S_B) / abs(S_A),
        gain_matched=matched,
        gain_db=20 * math.log10(abs(gfb1A)),
    )


def gain_reduced(x, beta_A, N):
    """True iff the matched closed-loop dc gain is below the open cascade's."""
    G1, G2 = dc_gains_from_x(x)
    gfb1A, _, _ = _type_a_gains(G1, G2, beta_A, N)
    M1, _ = cascade_dc(G1, G2, N)
    return abs(gfb1A) < abs(M1)


def verify_fluctuation_identity(x, N, delta_g1):
    """Residual |dM1 - (M2/G2)*dG1| under a CCR-exact perturbation of one
    amplifier; the identity G2*dM1 = M2*dG1 holds to first order, so the
    residual must shrink quadratically with delta_g1.

    dG2 is taken from the exact constraint (G1+dG1)^2 - (G2+dG2)^2 = 1 on the
    same sign branch, whose first-order expansion is the dG2 = G1*dG1/G2 of
    PerturbationModel; with the purely first-order dG2 the identity is exact
    and no quadratic remainder would be observable.
    """
    G1, G2 = dc_gains_from_x(x)
    if G2 == 0:
        raise ZeroGain("G2 = 0")
    M1, M2 = cascade_dc(G1, G2, N)
    g1p = G1 + delta_g1
    if g1p * g1p < 1:
        raise ValueError("perturbed G1 violates G1^2 - G2^2 = 1 solvability")
    g2p = math.copysign(math.sqrt(g1p * g1p - 1), G2)
    # one amplifier perturbed: [G']*[G]^(N-1); same-P diagonalization makes
    # the product order irrelevant
    lp, lm = G1 + G2, G1 - G2
    lpp = g1p + g2p
    lmp = g1p - g2p
    M1_pert = (lpp * lp ** (N - 1) + lmp * lm ** (N - 1)) / 2
    dM1 = M1_pert - M1
    return abs(dM1 - (M2 / G2) * delta_g1)


def verify_ratio_formula(x, beta_A, N):
    """(direct, formula) values of |S_B|/|S_A| at the calibrated beta_B.

    `formula` is the eigenvalue-sum expression
    |sum_k lfb_+^(N-2k+1) / sum_k l_+^(N-2k+1)|, k = 1..N.
    """
    G1, G2 = dc_gains_from_x(x)
    beta_B = calibrate_beta_B(x, beta_A, N)
    S_A = quantum_sensitivity_A(G1, G2, beta_A, N)
    S_B = quantum_sensitivity_B(G1, G2, beta_B, N)
    direct = abs(S_B) / abs(S_A)

    K1A = math.sqrt(1 - beta_A * beta_A)
    K2A = -beta_A
    den = 1 + G1 * K2A
    lfb_p = (G1 + K2A + G2 * K1A) / den
    l_p = G1 + G2
    num = sum(lfb_p ** (N - 2 * k + 1) for k in range(1, N + 1))
    dnm = sum(l_p ** (N - 2 * k + 1) for k in range(1, N + 1))
    formula = abs(num / dnm)
    return direct, formula


def remark1_approximations(x, beta_A, beta_B, N):
    """High-gain approximations dropping the Gfb2/Gfb1 factor from S_A, S_B."""
    G1, G2 = dc_gains_from_x(x)
    if G2 == 0:
        raise ZeroGain("G2 = 0")
    K1A, K2A = math.sqrt(1 - beta_A * beta_A), -beta_A
    K1B, K2B = math.sqrt(1 - beta_B * beta_B), -beta_B
    M1, _ = cascade_dc(G1, G2, N)
    S_A_approx = K1A * G1 / (G2 * (1 + G1 * K2A))
    S_B_approx = K1B * G1 / (G2 * (1 + M1 * K2B))
    return S_A_approx, S_B_approx


def finite_difference_sensitivity(x, beta, N, topology, rel_step=1e-6, j=1):
    """Definitional sensitivity (dGfb/Gfb)/(dG1/G1) by perturbing eps of the
    j-th amplifier by rel_step and recomputing the closed dc gain exactly.

    Serves as the independent oracle for the analytic formulas.
    """
    import numpy as np

    if not 1 <= j <= N:
        raise ValueError("amplifier index j out of range")
    G1, G2 = dc_gains_from_x(x)
    xp = x * (1 + rel_step)
    G1p, G2p = dc_gains_from_x(xp)

    a = math.sqrt(1 - beta * beta)
    K = np.array([[a, -beta], [beta, a]])
    G = np.array([[G1, G2], [G2, G1]])
    Gp = np.array([[G1p, G2p], [G2p, G1p]])

    def close(M):
        den = 1 - M[1, 1] * K[1, 0]
        det_g = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        det_k = K[0, 0] * K[1, 1] - K[0, 1] * K[1, 0]
        return np.array([
            [(M[0, 0] - K[1, 0] * det_g) / den, M[0, 1] * K[1, 1] / den],
            [M[1, 0] * K[0, 0] / den, (K[0, 1] + M[1, 1] * det_k) / den],
        ])

    def chain(mats):
        out = np.eye(2)
        for m in mats:
            out = out @ m
        return out

    if topology == "A":
        mats = [close(Gp) if i == j else close(G) for i in range(1, N + 1)]
        base = np.linalg.matrix_power(close(G), N)
        pert = chain(mats)
    elif topology == "B":
        mats = [Gp if i == j else G for i in range(1, N + 1)]
        base = close(np.linalg.matrix_power(G, N))
        pert = close(chain(mats))
    else:
        raise ValueError("topology must be 'A' or 'B'")

    dgfb = pert[0, 0] - base[0, 0]
    dg1 = G1p - G1
    return (dgfb / base[0, 0]) / (dg1 / G1)
