"""Simulation and spectral analysis of a parametrically squeezed
optomechanical oscillator measured by phase-coherent heterodyne detection."""

from .errors import (
    AliasingError,
    AntiDampedError,
    ConfigError,
    FilterDesignError,
    FitConvergenceError,
    FitDegeneracyError,
    FitError,
    ParametricInstabilityError,
    ParoscError,
    PipelineError,
    QuantumSqueezingRegimeError,
    ScheduleError,
    SpectralError,
)
from .model import (
    CavityPumpParams,
    DerivedRates,
    OscillatorParams,
    RegimeReport,
    SidebandWeights,
    analytic_sideband_psd,
    bose_occupancy,
    gamma_eff,
    gamma_par,
    quadrature_variances,
    ratios,
    sideband_weights,
    squeeze_param,
    thresholds,
)
from .spectral import Psd, chi2_indistinguishable, resolution_check, welch_psd, welch_psd_chunks
from .synth import (
    QuadTrajectory,
    Record,
    Schedule,
    Segment,
    SimGrid,
    detuned_reference_trajectory,
    ou_chain,
    ou_step,
    simulate_quadratures,
    simulate_sideband_envelopes,
)
from .detect import (
    DemodOutput,
    DetectionParams,
    compose_heterodyne_components,
    compose_heterodyne_wigner,
    lockin_demodulate,
    optimize_demod_phase,
    schedule_drive,
)
from .fitting import FitResult, fit_double_pair, fit_quadrature, fit_single_pair, lm_minimize
from .config import RunConfig, validate_config
from .pipeline import run_single, run_sweep_ratio_vs_s, run_sweep_variance_vs_tone_ratio

__version__ = "0.1.0"
