"""Frequency-domain toolkit for cascaded quantum feedback amplifiers."""

__version__ = "0.1.0"

from .network import (
    AmplifierParams,
    ControllerParams,
    NetworkSpec,
    Topology,
    TwoPortComplex,
    TwoPortRational,
    beam_splitter,
    build_network,
    cascade,
    ccr_residuals,
    close_feedback,
    eigen_pair,
    ndpa_transfer,
)
from .polyrat import Polynomial, Rational, quadratic_roots
from .sensitivity import (
    SensitivityReport,
    calibrate_beta_B,
    classical_closed_gain,
    classical_sensitivities,
    quantum_sensitivity_A,
    quantum_sensitivity_B,
    remark1_approximations,
    verify_fluctuation_identity,
    verify_main_theorem,
    verify_ratio_formula,
)
from .analysis import (
    FrequencyGrid,
    MonteCarloRun,
    NyquistResult,
    gain_margin,
    monte_carlo,
    nyquist,
    open_loop_type_B,
    type_a_stable,
)
